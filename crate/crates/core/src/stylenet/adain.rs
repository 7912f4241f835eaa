//! Adaptive instance normalization: re-scales each content channel so its
//! spatial mean/std match the style channel's.

use crate::error::{Error, Result};
use crate::tensor::{tensor_stats, FeatureMap, Tensor, STATS_EPS};

pub(crate) struct AdainTrace {
    mu_c: Vec<f32>,
    sigma_c: Vec<f32>,
    sigma_s: Vec<f32>,
}

pub(crate) fn adain_traced(c: &Tensor, s: &Tensor) -> Result<(Tensor, AdainTrace)> {
    if c.channels() != s.channels() {
        return Err(Error::ChannelMismatch {
            left: c.channels(),
            right: s.channels(),
        });
    }
    let cs = tensor_stats(c, STATS_EPS)?;
    let ss = tensor_stats(s, STATS_EPS)?;
    let mut out = c.clone();
    for ch in 0..c.channels() {
        let (mu_c, sd_c) = (cs.mean[ch], cs.std[ch]);
        let (mu_s, sd_s) = (ss.mean[ch], ss.std[ch]);
        let scale = sd_s / sd_c;
        for v in out.plane_mut(ch) {
            *v = scale * (*v - mu_c) + mu_s;
        }
    }
    Ok((
        out,
        AdainTrace {
            mu_c: cs.mean,
            sigma_c: cs.std,
            sigma_s: ss.std,
        },
    ))
}

/// Gradient w.r.t. the content features (style side is a constant target):
/// the usual instance-norm backward scaled by σ(s).
pub(crate) fn adain_backward_content(c: &Tensor, trace: &AdainTrace, dy: &Tensor) -> Tensor {
    let (ch_count, h, w) = c.shape();
    let n = (h * w) as f64;
    let mut dx = Tensor::zeros(ch_count, h, w);
    for ch in 0..ch_count {
        let mu = trace.mu_c[ch] as f64;
        let sd = trace.sigma_c[ch] as f64;
        let scale = trace.sigma_s[ch] as f64 / sd;
        let cp = c.plane(ch);
        let dyp = dy.plane(ch);
        let mut mean_dy = 0.0f64;
        let mut mean_dy_xhat = 0.0f64;
        for i in 0..cp.len() {
            let xhat = (cp[i] as f64 - mu) / sd;
            mean_dy += dyp[i] as f64;
            mean_dy_xhat += dyp[i] as f64 * xhat;
        }
        mean_dy /= n;
        mean_dy_xhat /= n;
        let dxp = dx.plane_mut(ch);
        for i in 0..cp.len() {
            let xhat = (cp[i] as f64 - mu) / sd;
            dxp[i] = (scale * (dyp[i] as f64 - mean_dy - xhat * mean_dy_xhat)) as f32;
        }
    }
    dx
}

pub(crate) fn adain_tensor(c: &Tensor, s: &Tensor) -> Result<Tensor> {
    adain_traced(c, s).map(|(t, _)| t)
}

/// AdaIN(c, s): per channel, σ(s)·(c − μ(c))/σ(c) + μ(s). Spatial dims of
/// content and style may differ; channel counts must match.
pub fn adain(c: &FeatureMap, s: &FeatureMap) -> Result<FeatureMap> {
    let out = adain_tensor(&c.tensor, &s.tensor)?;
    Ok(FeatureMap::new(out, c.tap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{channel_stats, Tap};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fm(c: usize, h: usize, w: usize, data: Vec<f32>) -> FeatureMap {
        FeatureMap::new(Tensor::from_vec(c, h, w, data).unwrap(), Tap::Relu4_1)
    }

    fn rand_fm(seed: u64, c: usize, h: usize, w: usize) -> FeatureMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..c * h * w).map(|_| rng.random_range(0.0..2.0)).collect();
        fm(c, h, w, data)
    }

    #[test]
    fn direct_two_point_example() {
        // Content [0,2]: μ=1, σ=1 (eps negligible); style stats μ=5, σ=2.
        let c = fm(1, 1, 2, vec![0.0, 2.0]);
        // Style with exact mean 5, population std 2: {3,7}.
        let s = fm(1, 1, 2, vec![3.0, 7.0]);
        let out = adain(&c, &s).unwrap();
        assert!((out.tensor.data()[0] - 3.0).abs() < 1e-3);
        assert!((out.tensor.data()[1] - 7.0).abs() < 1e-3);
    }

    #[test]
    fn identity_when_style_equals_content() {
        let c = rand_fm(1, 4, 6, 6);
        let out = adain(&c, &c).unwrap();
        for (o, i) in out.tensor.data().iter().zip(c.tensor.data()) {
            assert!((o - i).abs() < 1e-5, "{o} vs {i}");
        }
    }

    #[test]
    fn output_stats_match_style_stats() {
        for seed in 0..10u64 {
            let c = rand_fm(seed * 2 + 1, 8, 8, 8);
            let s = rand_fm(seed * 2 + 2, 8, 5, 7);
            let out = adain(&c, &s).unwrap();
            let so = channel_stats(&out, crate::tensor::STATS_EPS).unwrap();
            let ss = channel_stats(&s, crate::tensor::STATS_EPS).unwrap();
            for ch in 0..8 {
                assert!(
                    (so.mean[ch] - ss.mean[ch]).abs() < 1e-5,
                    "mean seed {seed} ch {ch}: {} vs {}",
                    so.mean[ch],
                    ss.mean[ch]
                );
                assert!(
                    (so.std[ch] - ss.std[ch]).abs() < 1e-4,
                    "std seed {seed} ch {ch}: {} vs {}",
                    so.std[ch],
                    ss.std[ch]
                );
            }
        }
    }

    #[test]
    fn content_affine_invariance() {
        let c = rand_fm(40, 4, 6, 6);
        let s = rand_fm(41, 4, 6, 6);
        let mut scaled = c.clone();
        for v in scaled.tensor.data_mut() {
            *v = 1.7 * *v + 0.3;
        }
        let a = adain(&c, &s).unwrap();
        let b = adain(&scaled, &s).unwrap();
        for (x, y) in a.tensor.data().iter().zip(b.tensor.data()) {
            assert!((x - y).abs() < 1e-4, "{x} vs {y}");
        }
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let c = rand_fm(1, 4, 4, 4);
        let s = rand_fm(2, 8, 4, 4);
        assert!(matches!(adain(&c, &s), Err(Error::ChannelMismatch { .. })));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let c = rand_fm(50, 2, 4, 4).tensor;
        let s = rand_fm(51, 2, 4, 4).tensor;
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let mut v = c.clone();
        for e in v.data_mut() {
            *e = rng.random_range(-1.0..1.0);
        }
        let loss = |c: &Tensor| -> f64 {
            adain_tensor(c, &s)
                .unwrap()
                .data()
                .iter()
                .zip(v.data())
                .map(|(&o, &vv)| o as f64 * vv as f64)
                .sum()
        };
        let (_, trace) = adain_traced(&c, &s).unwrap();
        let dx = adain_backward_content(&c, &trace, &v);
        let h = 1e-3f32;
        for idx in [0usize, 5, 13, 27, 31] {
            let mut cp = c.clone();
            cp.data_mut()[idx] += h;
            let mut cm = c.clone();
            cm.data_mut()[idx] -= h;
            let fd = (loss(&cp) - loss(&cm)) / (2.0 * h as f64);
            let an = dx.data()[idx] as f64;
            assert!(
                (fd - an).abs() < 2e-3 * (1.0 + an.abs()),
                "dc[{idx}]: {an} vs {fd}"
            );
        }
    }
}
