//! Pixel-domain rasters: float images in [0,1] and binary masks.
//!
//! Images are stored channels-last (`[y][x][c]`); feature tensors are
//! channels-first and live in [`crate::tensor`]. Conversion between the two
//! happens only at the encode/decode boundary.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// BT.601 luma weights used for RGB → gray conversion.
pub const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

/// H×W×C float32 raster, values nominally in `[0,1]`, C ∈ {1,3}.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::DimensionMismatch(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::ChannelMismatch {
                left: channels,
                right: 3,
            });
        }
        if data.len() != height * width * channels {
            return Err(Error::DimensionMismatch(format!(
                "buffer length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::new(height, width, channels, vec![0.0; height * width * channels])
            .expect("zeros: valid dims")
    }

    pub fn constant(height: usize, width: usize, channels: usize, value: f32) -> Self {
        Self::new(height, width, channels, vec![value; height * width * channels])
            .expect("constant: valid dims")
    }

    /// Builds a single-channel image from a per-pixel function of (y, x).
    pub fn from_fn_gray(height: usize, width: usize, f: impl Fn(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self::new(height, width, 1, data).expect("from_fn_gray: valid dims")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Gray-scale row as a contiguous slice. Panics if C != 1.
    #[inline]
    pub fn gray_row(&self, y: usize) -> &[f32] {
        assert_eq!(self.channels, 1, "gray_row on multi-channel image");
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn is_gray(&self) -> bool {
        self.channels == 1
    }

    /// Luma conversion with BT.601 weights; a copy for gray inputs.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.height * self.width);
        for px in self.data.chunks_exact(3) {
            data.push(LUMA_WEIGHTS[0] * px[0] + LUMA_WEIGHTS[1] * px[1] + LUMA_WEIGHTS[2] * px[2]);
        }
        Image {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    /// Replicates a gray image to three identical channels.
    pub fn replicate_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.height * self.width * 3);
        for &v in &self.data {
            data.extend_from_slice(&[v, v, v]);
        }
        Image {
            height: self.height,
            width: self.width,
            channels: 3,
            data,
        }
    }

    /// Clamps every value into [0,1].
    pub fn clamp01(&self) -> Image {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = v.clamp(0.0, 1.0);
        }
        out
    }

    /// Extracts the `size`×`size` subwindow at (y0, x0).
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Image> {
        if y0 + h > self.height || x0 + w > self.width {
            return Err(Error::DimensionMismatch(format!(
                "crop {h}x{w}@({y0},{x0}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(h * w * self.channels);
        for y in y0..y0 + h {
            let start = (y * self.width + x0) * self.channels;
            data.extend_from_slice(&self.data[start..start + w * self.channels]);
        }
        Ok(Image {
            height: h,
            width: w,
            channels: self.channels,
            data,
        })
    }

    /// Bilinear resize (pixel-center sampling, clamped edges).
    pub fn resize_bilinear(&self, new_h: usize, new_w: usize) -> Image {
        assert!(new_h >= 1 && new_w >= 1);
        let mut data = vec![0.0f32; new_h * new_w * self.channels];
        let sy = self.height as f32 / new_h as f32;
        let sx = self.width as f32 / new_w as f32;
        for y in 0..new_h {
            let fy = ((y as f32 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f32);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let wy = fy - y0 as f32;
            for x in 0..new_w {
                let fx = ((x as f32 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f32);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let wx = fx - x0 as f32;
                for c in 0..self.channels {
                    let v00 = self.get(y0, x0, c);
                    let v01 = self.get(y0, x1, c);
                    let v10 = self.get(y1, x0, c);
                    let v11 = self.get(y1, x1, c);
                    let top = v00 + (v01 - v00) * wx;
                    let bot = v10 + (v11 - v10) * wx;
                    data[(y * new_w + x) * self.channels + c] = top + (bot - top) * wy;
                }
            }
        }
        Image {
            height: new_h,
            width: new_w,
            channels: self.channels,
            data,
        }
    }

    /// Reflect-pads on the bottom/right so both dims become multiples of
    /// `multiple`. Returns the padded image and the amount added.
    pub fn pad_to_multiple(&self, multiple: usize) -> (Image, usize, usize) {
        let pad_h = (multiple - self.height % multiple) % multiple;
        let pad_w = (multiple - self.width % multiple) % multiple;
        if pad_h == 0 && pad_w == 0 {
            return (self.clone(), 0, 0);
        }
        let nh = self.height + pad_h;
        let nw = self.width + pad_w;
        let mut out = Image::zeros(nh, nw, self.channels);
        for y in 0..nh {
            let sy = reflect_index(y, self.height);
            for x in 0..nw {
                let sx = reflect_index(x, self.width);
                for c in 0..self.channels {
                    out.set(y, x, c, self.get(sy, sx, c));
                }
            }
        }
        (out, pad_h, pad_w)
    }

    /// Reads an 8-bit gray or RGB PNG; pixel p maps to p/255.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let dynimg = image::ImageReader::open(path)
            .map_err(|e| Error::io(path, e))?
            .decode()
            .map_err(|e| Error::ImageCodec {
                path: path.into(),
                source: e,
            })?;
        let img = match dynimg {
            image::DynamicImage::ImageLuma8(g) => {
                let (w, h) = (g.width() as usize, g.height() as usize);
                let data = g.into_raw().iter().map(|&p| p as f32 / 255.0).collect();
                Image::new(h, w, 1, data)?
            }
            image::DynamicImage::ImageLumaA8(g) => {
                let (w, h) = (g.width() as usize, g.height() as usize);
                let data = g
                    .into_raw()
                    .chunks_exact(2)
                    .map(|p| p[0] as f32 / 255.0)
                    .collect();
                Image::new(h, w, 1, data)?
            }
            other => {
                let rgb = other.into_rgb8();
                let (w, h) = (rgb.width() as usize, rgb.height() as usize);
                let data = rgb.into_raw().iter().map(|&p| p as f32 / 255.0).collect();
                Image::new(h, w, 3, data)?
            }
        };
        Ok(img)
    }

    /// Writes an 8-bit PNG. Values are clamped to [0,1] and quantized with
    /// round-half-up.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes: Vec<u8> = self.data.iter().map(|&v| quantize_u8(v)).collect();
        let color = if self.channels == 1 {
            image::ExtendedColorType::L8
        } else {
            image::ExtendedColorType::Rgb8
        };
        image::save_buffer_with_format(
            path,
            &bytes,
            self.width as u32,
            self.height as u32,
            color,
            image::ImageFormat::Png,
        )
        .map_err(|e| Error::ImageCodec {
            path: path.into(),
            source: e,
        })
    }
}

/// p ∈ [0,1] → byte with round-half-up, clamped.
#[inline]
pub fn quantize_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Mirror-without-repeat reflection of an out-of-range index into [0, n).
#[inline]
pub(crate) fn reflect_index(i: usize, n: usize) -> usize {
    if i < n {
        return i;
    }
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m < n {
        m
    } else {
        period - m
    }
}

/// Signed variant of [`reflect_index`] for kernel offsets.
#[inline]
pub(crate) fn reflect_index_i(i: isize, n: usize) -> usize {
    if i >= 0 && (i as usize) < n {
        return i as usize;
    }
    if n == 1 {
        return 0;
    }
    let period = (2 * (n - 1)) as isize;
    let mut m = i % period;
    if m < 0 {
        m += period;
    }
    let m = m as usize;
    if m < n {
        m
    } else {
        2 * (n - 1) - m
    }
}

/// Seeded deterministic crop: origin drawn from ChaCha8(seed).
pub fn random_crop(img: &Image, size: usize, seed: u64) -> Result<Image> {
    if img.height() < size || img.width() < size {
        return Err(Error::CropLargerThanImage {
            height: img.height(),
            width: img.width(),
            size,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y0 = rng.random_range(0..=img.height() - size);
    let x0 = rng.random_range(0..=img.width() - size);
    img.crop(y0, x0, size, size)
}

/// H×W boolean segmentation mask; `true` = vessel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "mask buffer length {} does not match {height}x{width}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Loads a mask from an 8-bit PNG; gray value > 127 counts as vessel.
    pub fn load_png(path: impl AsRef<Path>) -> Result<BinaryMask> {
        let img = Image::load_png(path)?.to_gray();
        let data = img.data().iter().map(|&v| v > 0.5).collect();
        BinaryMask::new(img.height(), img.width(), data)
    }

    /// Writes the mask as 8-bit gray PNG with 255 = vessel.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes: Vec<u8> = self.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
        image::save_buffer_with_format(
            path,
            &bytes,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::L8,
            image::ImageFormat::Png,
        )
        .map_err(|e| Error::ImageCodec {
            path: path.into(),
            source: e,
        })
    }
}
