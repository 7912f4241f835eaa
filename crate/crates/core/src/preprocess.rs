//! Denoising and contrast enhancement applied to angiogram frames before
//! style transfer: median filter, non-local means with statistical
//! nearest-neighbour selection, and multiscale top-hat enhancement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{reflect_index_i, Image};
use crate::morph::{close_gray, disk_offsets, open_gray};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Median window is (2r+1)²; 0 disables the filter.
    pub median_radius: usize,
    /// Patch side for NL-means, odd and ≥ 3.
    pub nlm_patch: usize,
    /// Search window side, odd and > nlm_patch.
    pub nlm_search: usize,
    /// Filtering strength h.
    pub nlm_h: f32,
    /// Neighbours kept after statistical ranking.
    pub nlm_k: usize,
    /// Disk radii of the multiscale top-hat, strictly increasing.
    pub tophat_radii: Vec<usize>,
    pub median_enabled: bool,
    pub nlm_enabled: bool,
    pub tophat_enabled: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            median_radius: 1,
            nlm_patch: 7,
            nlm_search: 21,
            nlm_h: 0.08,
            nlm_k: 16,
            tophat_radii: vec![3, 5, 7, 9],
            median_enabled: true,
            nlm_enabled: true,
            tophat_enabled: true,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nlm_patch < 3 || self.nlm_patch % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "nlm_patch must be odd and >= 3, got {}",
                self.nlm_patch
            )));
        }
        if self.nlm_search % 2 == 0 || self.nlm_search <= self.nlm_patch {
            return Err(Error::InvalidConfig(format!(
                "nlm_search must be odd and > nlm_patch, got {}",
                self.nlm_search
            )));
        }
        if !(self.nlm_h > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "nlm_h must be positive, got {}",
                self.nlm_h
            )));
        }
        if self.nlm_k == 0 {
            return Err(Error::InvalidConfig("nlm_k must be >= 1".into()));
        }
        if self.tophat_radii.windows(2).any(|w| w[1] <= w[0])
            || self.tophat_radii.iter().any(|&r| r == 0)
        {
            return Err(Error::InvalidConfig(format!(
                "tophat_radii must be strictly increasing and >= 1, got {:?}",
                self.tophat_radii
            )));
        }
        Ok(())
    }
}

/// Median filter with reflect padding; radius 0 returns a copy.
pub fn median_filter(img: &Image, radius: usize) -> Image {
    assert!(img.is_gray(), "median_filter expects single-channel input");
    if radius == 0 {
        return img.clone();
    }
    let (h, w) = (img.height(), img.width());
    let side = 2 * radius + 1;
    let mut out = Image::zeros(h, w, 1);
    let rows: Vec<Vec<f32>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut window = Vec::with_capacity(side * side);
            let mut row = Vec::with_capacity(w);
            for x in 0..w {
                window.clear();
                for dy in -(radius as isize)..=radius as isize {
                    let yy = reflect_index_i(y as isize + dy, h);
                    for dx in -(radius as isize)..=radius as isize {
                        let xx = reflect_index_i(x as isize + dx, w);
                        window.push(img.get(yy, xx, 0));
                    }
                }
                let mid = window.len() / 2;
                let (_, med, _) =
                    window.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
                row.push(*med);
            }
            row
        })
        .collect();
    for (y, row) in rows.into_iter().enumerate() {
        for (x, v) in row.into_iter().enumerate() {
            out.set(y, x, 0, v);
        }
    }
    out
}

/// Robust noise-level estimate: scaled median absolute deviation of the
/// 3×3 Laplacian residuals.
pub fn estimate_noise_sigma(img: &Image) -> f32 {
    assert!(img.is_gray());
    let (h, w) = (img.height(), img.width());
    let mut residuals = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let c = img.get(y, x, 0);
            let up = img.get(reflect_index_i(y as isize - 1, h), x, 0);
            let dn = img.get(reflect_index_i(y as isize + 1, h), x, 0);
            let lf = img.get(y, reflect_index_i(x as isize - 1, w), 0);
            let rt = img.get(y, reflect_index_i(x as isize + 1, w), 0);
            residuals.push(up + dn + lf + rt - 4.0 * c);
        }
    }
    let med = median_of(&mut residuals.clone());
    let mut devs: Vec<f32> = residuals.iter().map(|r| (r - med).abs()).collect();
    let mad = median_of(&mut devs);
    // Laplacian kernel has squared norm 20, so divide that back out.
    1.4826 * mad / 20.0f32.sqrt()
}

fn median_of(v: &mut [f32]) -> f32 {
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

/// Non-local means with statistical nearest-neighbour selection: candidates
/// are ranked by |patch distance − expected noise offset| and only the best
/// K contribute.
pub fn nlm_snn(img: &Image, cfg: &PreprocessConfig) -> Image {
    assert!(img.is_gray());
    let (h, w) = (img.height(), img.width());
    let pr = (cfg.nlm_patch / 2) as isize;
    let sr = (cfg.nlm_search / 2) as isize;
    let patch_len = (cfg.nlm_patch * cfg.nlm_patch) as f32;
    let sigma = estimate_noise_sigma(img);
    let offset = 2.0 * sigma * sigma;
    let h2 = cfg.nlm_h * cfg.nlm_h;

    let patch_dist = |y1: usize, x1: usize, y2: usize, x2: usize| -> f32 {
        let mut ssd = 0.0f32;
        for dy in -pr..=pr {
            let ya = reflect_index_i(y1 as isize + dy, h);
            let yb = reflect_index_i(y2 as isize + dy, h);
            for dx in -pr..=pr {
                let xa = reflect_index_i(x1 as isize + dx, w);
                let xb = reflect_index_i(x2 as isize + dx, w);
                let d = img.get(ya, xa, 0) - img.get(yb, xb, 0);
                ssd += d * d;
            }
        }
        ssd / patch_len
    };

    let rows: Vec<Vec<f32>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::with_capacity(w);
            let mut candidates: Vec<(f32, f32, f32)> = Vec::new(); // (rank key, dist, value)
            for x in 0..w {
                candidates.clear();
                let y_lo = (y as isize - sr).max(0) as usize;
                let y_hi = ((y as isize + sr) as usize).min(h - 1);
                let x_lo = (x as isize - sr).max(0) as usize;
                let x_hi = ((x as isize + sr) as usize).min(w - 1);
                for sy in y_lo..=y_hi {
                    for sx in x_lo..=x_hi {
                        let d = patch_dist(y, x, sy, sx);
                        candidates.push(((d - offset).abs(), d, img.get(sy, sx, 0)));
                    }
                }
                // Stable sort keeps scan order on ties, so output is deterministic.
                candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
                let k = cfg.nlm_k.min(candidates.len());
                let mut wsum = 0.0f32;
                let mut vsum = 0.0f32;
                for &(_, d, v) in &candidates[..k] {
                    let wgt = (-((d - offset).max(0.0)) / h2).exp();
                    wsum += wgt;
                    vsum += wgt * v;
                }
                row.push((vsum / wsum).clamp(0.0, 1.0));
            }
            row
        })
        .collect();

    let mut out = Image::zeros(h, w, 1);
    for (y, row) in rows.into_iter().enumerate() {
        for (x, v) in row.into_iter().enumerate() {
            out.set(y, x, 0, v);
        }
    }
    out
}

/// Median filter followed by NL-means; disabled stages pass through.
pub fn denoise(img: &Image, cfg: &PreprocessConfig) -> Result<Image> {
    if !img.is_gray() {
        return Err(Error::ChannelMismatch {
            left: img.channels(),
            right: 1,
        });
    }
    cfg.validate()?;
    let mut out = if cfg.median_enabled && cfg.median_radius > 0 {
        median_filter(img, cfg.median_radius)
    } else {
        img.clone()
    };
    if cfg.nlm_enabled {
        out = nlm_snn(&out, cfg);
    }
    Ok(out.clamp01())
}

/// Multiscale top-hat enhancement: adds the strongest bright top-hat across
/// the radii and subtracts the strongest dark one, then clamps to [0,1].
pub fn tophat_enhance(img: &Image, radii: &[usize]) -> Result<Image> {
    if !img.is_gray() {
        return Err(Error::ChannelMismatch {
            left: img.channels(),
            right: 1,
        });
    }
    if radii.is_empty() {
        return Err(Error::InvalidConfig("tophat radii must be non-empty".into()));
    }
    let (h, w) = (img.height(), img.width());
    let mut white_max = vec![0.0f32; h * w];
    let mut black_max = vec![0.0f32; h * w];
    for &r in radii {
        let d = disk_offsets(r);
        let opened = open_gray(img, &d);
        let closed = close_gray(img, &d);
        for i in 0..h * w {
            let orig = img.data()[i];
            white_max[i] = white_max[i].max(orig - opened.data()[i]);
            black_max[i] = black_max[i].max(closed.data()[i] - orig);
        }
    }
    let mut out = Image::zeros(h, w, 1);
    for i in 0..h * w {
        out.data_mut()[i] = (img.data()[i] + white_max[i] - black_max[i]).clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Full pre-processing chain: gray conversion, denoise, top-hat, then
/// replication to the three channels the encoder expects.
pub fn preprocess(img: &Image, cfg: &PreprocessConfig) -> Result<Image> {
    cfg.validate()?;
    let mut gray = img.to_gray();
    if cfg.median_enabled || cfg.nlm_enabled {
        gray = denoise(&gray, cfg)?;
    }
    if cfg.tophat_enabled {
        gray = tophat_enhance(&gray, &cfg.tophat_radii)?;
    }
    Ok(gray.replicate_rgb())
}
