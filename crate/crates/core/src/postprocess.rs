//! Turns a stylized image into a binary vessel mask: polarity-aware
//! thresholding, binary closing/opening and small-component removal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, Image};
use crate::morph::{close_mask, disk_offsets, open_mask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    Otsu,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    /// Vessels are darker than the background.
    DarkStrokes,
    /// Vessels are brighter than the background.
    BrightStrokes,
    /// Strokes are whichever side is the minority at the threshold.
    Auto,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostConfig {
    pub threshold_mode: ThresholdMode,
    pub fixed_threshold: f32,
    pub polarity: Polarity,
    pub close_radius: usize,
    pub open_radius: usize,
    /// Components smaller than this many pixels are removed.
    pub min_component: usize,
}

impl Default for PostConfig {
    fn default() -> Self {
        Self {
            threshold_mode: ThresholdMode::Otsu,
            fixed_threshold: 0.5,
            polarity: Polarity::Auto,
            close_radius: 1,
            open_radius: 1,
            min_component: 30,
        }
    }
}

impl PostConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fixed_threshold > 0.0 && self.fixed_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "fixed_threshold must lie in (0,1), got {}",
                self.fixed_threshold
            )));
        }
        Ok(())
    }
}

/// Otsu's threshold over a 256-bin histogram. Returns `None` when the
/// histogram is degenerate (single occupied bin).
pub fn otsu_threshold(gray: &Image) -> Option<f32> {
    assert!(gray.is_gray());
    let mut hist = [0u64; 256];
    for &v in gray.data() {
        let bin = ((v.clamp(0.0, 1.0) * 256.0) as usize).min(255);
        hist[bin] += 1;
    }
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let total = gray.data().len() as f64;
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();
    let mut w0 = 0.0f64;
    let mut sum0 = 0.0f64;
    let mut best_k = 0usize;
    let mut best_var = -1.0f64;
    for k in 0..255 {
        w0 += hist[k] as f64;
        if w0 == 0.0 {
            continue;
        }
        let w1 = total - w0;
        if w1 == 0.0 {
            break;
        }
        sum0 += k as f64 * hist[k] as f64;
        let mu0 = sum0 / w0;
        let mu1 = (sum_all - sum0) / w1;
        let var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if var > best_var {
            best_var = var;
            best_k = k;
        }
    }
    // Threshold between bin k and k+1, expressed on the [0,1] scale.
    Some((best_k + 1) as f32 / 256.0)
}

/// Thresholds the stylized image into a mask; `true` = vessel. A constant
/// image yields an all-false mask.
pub fn binarize(stylized: &Image, cfg: &PostConfig) -> Result<BinaryMask> {
    cfg.validate()?;
    let gray = stylized.to_gray();
    let (h, w) = (gray.height(), gray.width());

    let threshold = match cfg.threshold_mode {
        ThresholdMode::Fixed => cfg.fixed_threshold,
        ThresholdMode::Otsu => match otsu_threshold(&gray) {
            Some(t) => t,
            None => return Ok(BinaryMask::filled(h, w, false)),
        },
    };

    let dark_strokes = match cfg.polarity {
        Polarity::DarkStrokes => true,
        Polarity::BrightStrokes => false,
        Polarity::Auto => {
            let dark = gray.data().iter().filter(|&&v| v < threshold).count();
            // Strokes are the minority side; flip when dark dominates.
            dark * 2 <= gray.data().len()
        }
    };

    let data = gray
        .data()
        .iter()
        .map(|&v| if dark_strokes { v < threshold } else { v > threshold })
        .collect();
    BinaryMask::new(h, w, data)
}

/// 8-connected component labels; label 0 is background.
pub fn label_components(mask: &BinaryMask) -> (Vec<u32>, Vec<usize>) {
    let (h, w) = (mask.height(), mask.width());
    let mut labels = vec![0u32; h * w];
    let mut sizes = vec![0usize]; // sizes[0] unused
    let mut next = 1u32;
    let mut stack = Vec::new();
    for start in 0..h * w {
        if !mask.data()[start] || labels[start] != 0 {
            continue;
        }
        let label = next;
        next += 1;
        let mut size = 0usize;
        stack.push(start);
        labels[start] = label;
        while let Some(i) = stack.pop() {
            size += 1;
            let (y, x) = (i / w, i % w);
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dy == 0 && dx == 0 {
                        continue;
                    }
                    let (yy, xx) = (y as isize + dy, x as isize + dx);
                    if yy < 0 || xx < 0 || yy >= h as isize || xx >= w as isize {
                        continue;
                    }
                    let j = yy as usize * w + xx as usize;
                    if mask.data()[j] && labels[j] == 0 {
                        labels[j] = label;
                        stack.push(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Removes 8-connected components smaller than `min_size` pixels.
pub fn remove_small_components(mask: &BinaryMask, min_size: usize) -> BinaryMask {
    if min_size <= 1 {
        return mask.clone();
    }
    let (labels, sizes) = label_components(mask);
    let mut out = mask.clone();
    let w = mask.width();
    for (i, &l) in labels.iter().enumerate() {
        if l != 0 && sizes[l as usize] < min_size {
            out.set(i / w, i % w, false);
        }
    }
    out
}

/// Binary closing, then opening, then small-component removal.
pub fn cleanup(mask: &BinaryMask, cfg: &PostConfig) -> BinaryMask {
    let closed = if cfg.close_radius > 0 {
        close_mask(mask, &disk_offsets(cfg.close_radius))
    } else {
        mask.clone()
    };
    let opened = if cfg.open_radius > 0 {
        open_mask(&closed, &disk_offsets(cfg.open_radius))
    } else {
        closed
    };
    remove_small_components(&opened, cfg.min_component)
}

/// Renders the prediction in green over the ground truth in white.
pub fn overlay(pred: &BinaryMask, gt: &BinaryMask) -> Result<Image> {
    if pred.height() != gt.height() || pred.width() != gt.width() {
        return Err(Error::DimensionMismatch(format!(
            "overlay: prediction {}x{} vs ground truth {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    let (h, w) = (pred.height(), pred.width());
    let mut img = Image::zeros(h, w, 3);
    for y in 0..h {
        for x in 0..w {
            if gt.get(y, x) {
                img.set(y, x, 0, 1.0);
                img.set(y, x, 1, 1.0);
                img.set(y, x, 2, 1.0);
            }
            if pred.get(y, x) {
                img.set(y, x, 0, 0.0);
                img.set(y, x, 1, 1.0);
                img.set(y, x, 2, 0.0);
            }
        }
    }
    Ok(img)
}
