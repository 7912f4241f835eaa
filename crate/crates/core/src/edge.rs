//! Local-structure edge maps: either precomputed maps loaded from disk
//! (e.g. the output of a pretrained edge network) or a classical gradient
//! fallback so the whole pipeline runs self-contained.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{reflect_index_i, Image};

/// Where an edge map came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeProvenance {
    ExternalFile,
    ClassicalFallback,
}

/// H×W edge-strength raster in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap {
    height: usize,
    width: usize,
    data: Vec<f32>,
    pub provenance: EdgeProvenance,
}

impl EdgeMap {
    pub fn new(
        height: usize,
        width: usize,
        data: Vec<f32>,
        provenance: EdgeProvenance,
    ) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "edge buffer length {} does not match {height}x{width}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
            provenance,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Single-channel image view of the edge strengths.
    pub fn to_image(&self) -> Image {
        Image::new(self.height, self.width, 1, self.data.clone()).expect("valid dims")
    }

    pub fn save_png(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        self.to_image().save_png(path)
    }
}

/// Edge-map provider selection.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub enum EdgeProviderConfig {
    /// Normalized Scharr gradient magnitude.
    #[default]
    Fallback,
    /// Precomputed single-channel PNG, 255 = strongest edge.
    File(PathBuf),
}

/// Produces the edge map for `img` with the configured provider.
pub fn detect_edges(img: &Image, provider: &EdgeProviderConfig) -> Result<EdgeMap> {
    match provider {
        EdgeProviderConfig::Fallback => Ok(scharr_edges(img)),
        EdgeProviderConfig::File(path) => {
            let loaded = Image::load_png(path)?.to_gray();
            if loaded.height() != img.height() || loaded.width() != img.width() {
                return Err(Error::EdgeMapSizeMismatch {
                    image_h: img.height(),
                    image_w: img.width(),
                    edge_h: loaded.height(),
                    edge_w: loaded.width(),
                });
            }
            EdgeMap::new(
                loaded.height(),
                loaded.width(),
                loaded.data().to_vec(),
                EdgeProvenance::ExternalFile,
            )
        }
    }
}

/// Gradient-magnitude fallback: 3×3 Scharr kernels with reflect padding,
/// scaled so the maximum response is 1 unless the image is constant.
///
/// Gradients are formed from neighbour differences, so constant regions
/// cancel exactly and a flat image yields an all-zero map.
pub fn scharr_edges(img: &Image) -> EdgeMap {
    let gray = img.to_gray();
    let (h, w) = (gray.height(), gray.width());
    let mut mag = vec![0.0f32; h * w];
    let mut max_mag = 0.0f32;
    for y in 0..h {
        let ym = reflect_index_i(y as isize - 1, h);
        let yp = reflect_index_i(y as isize + 1, h);
        for x in 0..w {
            let xm = reflect_index_i(x as isize - 1, w);
            let xp = reflect_index_i(x as isize + 1, w);
            let a00 = gray.get(ym, xm, 0);
            let a01 = gray.get(ym, x, 0);
            let a02 = gray.get(ym, xp, 0);
            let a10 = gray.get(y, xm, 0);
            let a12 = gray.get(y, xp, 0);
            let a20 = gray.get(yp, xm, 0);
            let a21 = gray.get(yp, x, 0);
            let a22 = gray.get(yp, xp, 0);
            let gx = 3.0 * (a02 - a00) + 10.0 * (a12 - a10) + 3.0 * (a22 - a20);
            let gy = 3.0 * (a20 - a00) + 10.0 * (a21 - a01) + 3.0 * (a22 - a02);
            let m = (gx * gx + gy * gy).sqrt();
            mag[y * w + x] = m;
            max_mag = max_mag.max(m);
        }
    }
    if max_mag > 0.0 {
        for v in &mut mag {
            *v /= max_mag;
        }
    }
    EdgeMap {
        height: h,
        width: w,
        data: mag,
        provenance: EdgeProvenance::ClassicalFallback,
    }
}
