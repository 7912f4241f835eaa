//! Channels-first float tensors, encoder tap labels, and channel statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// C×H×W float32 tensor, plane-major (`[c][y][x]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::DimensionMismatch(format!(
                "tensor buffer length {} does not match {channels}x{height}x{width}",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn row(&self, c: usize, y: usize) -> &[f32] {
        let base = (c * self.height + y) * self.width;
        &self.data[base..base + self.width]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape() == other.shape()
    }

    /// Converts a pixel-domain image (HWC) to a channels-first tensor.
    pub fn from_image(img: &Image) -> Tensor {
        let (h, w, c) = (img.height(), img.width(), img.channels());
        let mut t = Tensor::zeros(c, h, w);
        for ch in 0..c {
            let plane = t.plane_mut(ch);
            for y in 0..h {
                for x in 0..w {
                    plane[y * w + x] = img.get(y, x, ch);
                }
            }
        }
        t
    }

    /// Converts a 1- or 3-channel tensor back to a pixel-domain image.
    pub fn to_image(&self) -> Result<Image> {
        let (c, h, w) = self.shape();
        let mut data = vec![0.0f32; h * w * c];
        for ch in 0..c {
            let plane = self.plane(ch);
            for i in 0..h * w {
                data[i * c + ch] = plane[i];
            }
        }
        Image::new(h, w, c, data)
    }
}

/// Encoder tap layers, in forward order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tap {
    Relu1_1,
    Relu2_1,
    Relu3_1,
    Relu4_1,
}

impl Tap {
    pub const ALL: [Tap; 4] = [Tap::Relu1_1, Tap::Relu2_1, Tap::Relu3_1, Tap::Relu4_1];

    pub fn name(self) -> &'static str {
        match self {
            Tap::Relu1_1 => "relu1_1",
            Tap::Relu2_1 => "relu2_1",
            Tap::Relu3_1 => "relu3_1",
            Tap::Relu4_1 => "relu4_1",
        }
    }

    /// Total downsampling factor relative to the input image.
    pub fn stride(self) -> usize {
        match self {
            Tap::Relu1_1 => 1,
            Tap::Relu2_1 => 2,
            Tap::Relu3_1 => 4,
            Tap::Relu4_1 => 8,
        }
    }
}

/// Encoder activations at a named tap layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub tensor: Tensor,
    pub tap: Tap,
}

impl FeatureMap {
    pub fn new(tensor: Tensor, tap: Tap) -> Self {
        Self { tensor, tap }
    }

    pub fn channels(&self) -> usize {
        self.tensor.channels()
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.tensor.shape()
    }
}

/// Per-channel (mean, std) pairs over the spatial dims.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl ChannelStats {
    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

/// Stabilizer added under the square root in [`channel_stats`] wherever the
/// result feeds a normalization.
pub const STATS_EPS: f32 = 1e-5;

/// Spatial mean and population std per channel; `eps` is added inside the
/// square root so constant channels stay divisible.
pub fn channel_stats(fm: &FeatureMap, eps: f32) -> Result<ChannelStats> {
    tensor_stats(&fm.tensor, eps)
}

pub(crate) fn tensor_stats(t: &Tensor, eps: f32) -> Result<ChannelStats> {
    let (c, h, w) = t.shape();
    let n = h * w;
    if n == 0 || c == 0 {
        return Err(Error::EmptyFeatureMap);
    }
    let mut mean = Vec::with_capacity(c);
    let mut std = Vec::with_capacity(c);
    for ch in 0..c {
        let plane = t.plane(ch);
        let mut sum = 0.0f64;
        for &v in plane {
            sum += v as f64;
        }
        let mu = sum / n as f64;
        let mut var = 0.0f64;
        for &v in plane {
            let d = v as f64 - mu;
            var += d * d;
        }
        var /= n as f64;
        mean.push(mu as f32);
        std.push((var + eps as f64).sqrt() as f32);
    }
    Ok(ChannelStats { mean, std })
}
