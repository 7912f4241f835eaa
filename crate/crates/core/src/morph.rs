//! Flat-disk grayscale and binary morphology.
//!
//! Erosion/dilation take the min/max over the in-bounds part of the disk, so
//! borders never invent values outside the image range.

use crate::image::{BinaryMask, Image};

/// Offsets (dy, dx) of a flat Euclidean disk: dy² + dx² ≤ r².
pub fn disk_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let r2 = r * r;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dy * dy + dx * dx <= r2 {
                out.push((dy, dx));
            }
        }
    }
    out
}

fn gray_morph(img: &Image, offsets: &[(isize, isize)], take_max: bool) -> Image {
    assert!(img.is_gray(), "morphology expects single-channel input");
    let (h, w) = (img.height(), img.width());
    let mut out = Image::zeros(h, w, 1);
    for y in 0..h {
        for x in 0..w {
            let mut acc = if take_max { f32::NEG_INFINITY } else { f32::INFINITY };
            for &(dy, dx) in offsets {
                let yy = y as isize + dy;
                let xx = x as isize + dx;
                if yy < 0 || xx < 0 || yy >= h as isize || xx >= w as isize {
                    continue;
                }
                let v = img.get(yy as usize, xx as usize, 0);
                acc = if take_max { acc.max(v) } else { acc.min(v) };
            }
            out.set(y, x, 0, acc);
        }
    }
    out
}

pub fn erode_gray(img: &Image, offsets: &[(isize, isize)]) -> Image {
    gray_morph(img, offsets, false)
}

pub fn dilate_gray(img: &Image, offsets: &[(isize, isize)]) -> Image {
    gray_morph(img, offsets, true)
}

/// Opening: erosion then dilation. Removes bright detail thinner than the disk.
pub fn open_gray(img: &Image, offsets: &[(isize, isize)]) -> Image {
    dilate_gray(&erode_gray(img, offsets), offsets)
}

/// Closing: dilation then erosion. Fills dark detail thinner than the disk.
pub fn close_gray(img: &Image, offsets: &[(isize, isize)]) -> Image {
    erode_gray(&dilate_gray(img, offsets), offsets)
}

fn binary_morph(mask: &BinaryMask, offsets: &[(isize, isize)], dilate: bool) -> BinaryMask {
    let (h, w) = (mask.height(), mask.width());
    let mut out = BinaryMask::filled(h, w, false);
    for y in 0..h {
        for x in 0..w {
            let mut hit = !dilate;
            for &(dy, dx) in offsets {
                let yy = y as isize + dy;
                let xx = x as isize + dx;
                if yy < 0 || xx < 0 || yy >= h as isize || xx >= w as isize {
                    continue;
                }
                let v = mask.get(yy as usize, xx as usize);
                if dilate && v {
                    hit = true;
                    break;
                }
                if !dilate && !v {
                    hit = false;
                    break;
                }
            }
            out.set(y, x, hit);
        }
    }
    out
}

pub fn erode_mask(mask: &BinaryMask, offsets: &[(isize, isize)]) -> BinaryMask {
    binary_morph(mask, offsets, false)
}

pub fn dilate_mask(mask: &BinaryMask, offsets: &[(isize, isize)]) -> BinaryMask {
    binary_morph(mask, offsets, true)
}

pub fn open_mask(mask: &BinaryMask, offsets: &[(isize, isize)]) -> BinaryMask {
    dilate_mask(&erode_mask(mask, offsets), offsets)
}

pub fn close_mask(mask: &BinaryMask, offsets: &[(isize, isize)]) -> BinaryMask {
    erode_mask(&dilate_mask(mask, offsets), offsets)
}
