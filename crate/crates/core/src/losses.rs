//! The three training losses (content, statistics-matching style, edge)
//! plus their weighted combination and analytic gradients.
//!
//! Squared distances are realized as mean squared error so every term is
//! smooth at zero; style and edge terms are summed over the four taps with
//! equal weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{tensor_stats, ChannelStats, FeatureMap, Tensor};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.05,
            gamma: 0.05,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 || self.gamma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "loss weights must be non-negative: alpha={} beta={} gamma={}",
                self.alpha, self.beta, self.gamma
            )));
        }
        Ok(())
    }
}

/// Per-iteration loss record; `total` is exactly the weighted combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub content: f64,
    pub style: f64,
    pub edge: f64,
    pub total: f64,
}

fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch {
            left: format!("{:?}", a.shape()),
            right: format!("{:?}", b.shape()),
        });
    }
    let mut acc = 0.0f64;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let d = x as f64 - y as f64;
        acc += d * d;
    }
    Ok(acc / a.len() as f64)
}

/// Mean squared error between the re-encoded output features and the
/// aligned-content target.
pub fn content_loss(reencoded: &FeatureMap, target: &FeatureMap) -> Result<f64> {
    mse(&reencoded.tensor, &target.tensor)
}

/// Content loss plus its gradient w.r.t. the re-encoded features.
pub fn content_loss_grad(reencoded: &FeatureMap, target: &FeatureMap) -> Result<(f64, Tensor)> {
    let loss = mse(&reencoded.tensor, &target.tensor)?;
    let n = reencoded.tensor.len() as f64;
    let mut grad = reencoded.tensor.clone();
    for (g, &t) in grad.data_mut().iter_mut().zip(target.tensor.data()) {
        *g = ((2.0 / n) * (*g as f64 - t as f64)) as f32;
    }
    Ok((loss, grad))
}

fn check_tap_lists(a: &[FeatureMap], b: &[FeatureMap]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            left: format!("{} taps", a.len()),
            right: format!("{} taps", b.len()),
        });
    }
    Ok(())
}

/// Statistics-matching style loss summed over the taps:
/// Σ_i MSE(μ(out_i), μ(style_i)) + MSE(σ(out_i), σ(style_i)).
pub fn style_loss(output_taps: &[FeatureMap], style_taps: &[FeatureMap], eps: f32) -> Result<f64> {
    check_tap_lists(output_taps, style_taps)?;
    let mut stats = Vec::with_capacity(style_taps.len());
    for (o, s) in output_taps.iter().zip(style_taps) {
        if o.channels() != s.channels() {
            return Err(Error::ChannelMismatch {
                left: o.channels(),
                right: s.channels(),
            });
        }
        stats.push(tensor_stats(&s.tensor, eps)?);
    }
    style_loss_from_stats(output_taps, &stats, eps).map(|(l, _)| l)
}

/// Style loss against precomputed style statistics; also returns the
/// per-tap gradients w.r.t. the output activations.
pub fn style_loss_from_stats(
    output_taps: &[FeatureMap],
    style_stats: &[ChannelStats],
    eps: f32,
) -> Result<(f64, Vec<Tensor>)> {
    if output_taps.len() != style_stats.len() {
        return Err(Error::ShapeMismatch {
            left: format!("{} taps", output_taps.len()),
            right: format!("{} stats", style_stats.len()),
        });
    }
    let mut total = 0.0f64;
    let mut grads = Vec::with_capacity(output_taps.len());
    for (fm, ss) in output_taps.iter().zip(style_stats) {
        if fm.channels() != ss.channels() {
            return Err(Error::ChannelMismatch {
                left: fm.channels(),
                right: ss.channels(),
            });
        }
        let os = tensor_stats(&fm.tensor, eps)?;
        let c = fm.channels();
        let (_, h, w) = fm.shape();
        let n = (h * w) as f64;
        let mut grad = Tensor::zeros(c, h, w);
        let mut tap_loss = 0.0f64;
        for ch in 0..c {
            let dmu = os.mean[ch] as f64 - ss.mean[ch] as f64;
            let dsd = os.std[ch] as f64 - ss.std[ch] as f64;
            tap_loss += (dmu * dmu + dsd * dsd) / c as f64;
            // d/dx of the channel terms: means and stds are spatial statistics.
            let mu = os.mean[ch] as f64;
            let sd = os.std[ch] as f64;
            let gmu = 2.0 * dmu / (c as f64 * n);
            let gsd = 2.0 * dsd / (c as f64 * n * sd);
            let src = fm.tensor.plane(ch);
            let dst = grad.plane_mut(ch);
            for i in 0..src.len() {
                dst[i] = (gmu + gsd * (src[i] as f64 - mu)) as f32;
            }
        }
        total += tap_loss;
        grads.push(grad);
    }
    Ok((total, grads))
}

/// Per-tap MSE between output activations and edge-image activations,
/// summed over the taps.
pub fn edge_loss(output_taps: &[FeatureMap], edge_taps: &[FeatureMap]) -> Result<f64> {
    edge_loss_grad(output_taps, edge_taps).map(|(l, _)| l)
}

pub fn edge_loss_grad(
    output_taps: &[FeatureMap],
    edge_taps: &[FeatureMap],
) -> Result<(f64, Vec<Tensor>)> {
    check_tap_lists(output_taps, edge_taps)?;
    let mut total = 0.0f64;
    let mut grads = Vec::with_capacity(output_taps.len());
    for (o, e) in output_taps.iter().zip(edge_taps) {
        total += mse(&o.tensor, &e.tensor)?;
        let n = o.tensor.len() as f64;
        let mut grad = o.tensor.clone();
        for (g, &t) in grad.data_mut().iter_mut().zip(e.tensor.data()) {
            *g = ((2.0 / n) * (*g as f64 - t as f64)) as f32;
        }
        grads.push(grad);
    }
    Ok((total, grads))
}

/// Weighted combination `α·lc + β·ls + γ·le`.
pub fn total_loss(lc: f64, ls: f64, le: f64, w: &LossWeights) -> Result<LossReport> {
    w.validate()?;
    if !lc.is_finite() || !ls.is_finite() || !le.is_finite() {
        return Err(Error::NonFiniteLoss {
            term: if !lc.is_finite() {
                "content"
            } else if !ls.is_finite() {
                "style"
            } else {
                "edge"
            },
            iteration: 0,
        });
    }
    Ok(LossReport {
        content: lc,
        style: ls,
        edge: le,
        total: w.alpha * lc + w.beta * ls + w.gamma * le,
    })
}
