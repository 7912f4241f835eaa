//! Mirror decoder: maps relu4_1-shaped features back to pixel space with
//! ×8 total upsampling. LeakyReLU activations everywhere except the final
//! RGB projection, which is left raw.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::stylenet::ops::{
    leaky_relu, leaky_relu_backward, upsample2_backward, upsample2_nearest,
};
use crate::stylenet::weights::DecoderWeights;
use crate::tensor::{FeatureMap, Tap, Tensor};

/// Conv indices followed (after activation) by ×2 upsampling.
const UP_AFTER: [usize; 3] = [0, 4, 6];

pub(crate) struct DecoderTrace {
    /// Input tensor of each convolution.
    inputs: Vec<Tensor>,
    /// Activation outputs for layers 0..8.
    posts: Vec<Tensor>,
}

/// Per-layer weight and bias gradients, same layout as the decoder convs.
pub(crate) struct DecoderGrads {
    pub dw: Vec<Vec<f32>>,
    pub db: Vec<Vec<f32>>,
}

impl DecoderGrads {
    pub fn zeros(w: &DecoderWeights) -> Self {
        Self {
            dw: w.layers.iter().map(|l| vec![0.0; l.weight.len()]).collect(),
            db: w.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }
}

pub(crate) fn decode_traced(x: &Tensor, w: &DecoderWeights) -> Result<(Tensor, DecoderTrace)> {
    if x.channels() != w.input_channels() {
        return Err(Error::ChannelMismatch {
            left: x.channels(),
            right: w.input_channels(),
        });
    }
    let mut inputs = Vec::with_capacity(9);
    let mut posts = Vec::with_capacity(8);
    let mut cur = x.clone();
    for (i, conv) in w.layers.iter().enumerate() {
        inputs.push(cur.clone());
        cur = conv.forward(&cur);
        if i < 8 {
            cur = leaky_relu(&cur, w.negative_slope);
            posts.push(cur.clone());
            if UP_AFTER.contains(&i) {
                cur = upsample2_nearest(&cur);
            }
        }
    }
    Ok((cur, DecoderTrace { inputs, posts }))
}

/// Backward through the decoder: returns parameter gradients and the
/// gradient w.r.t. the decoder input.
pub(crate) fn decoder_backward(
    w: &DecoderWeights,
    trace: &DecoderTrace,
    d_out: &Tensor,
) -> (DecoderGrads, Tensor) {
    let mut grads = DecoderGrads::zeros(w);
    let mut g = d_out.clone();
    for i in (0..9).rev() {
        if i < 8 {
            if UP_AFTER.contains(&i) {
                g = upsample2_backward(&g);
            }
            g = leaky_relu_backward(&trace.posts[i], &g, w.negative_slope);
        }
        w.layers[i].backward_params(&trace.inputs[i], &g, &mut grads.dw[i], &mut grads.db[i]);
        g = w.layers[i].backward_input(&g);
    }
    (grads, g)
}

pub(crate) fn decode_tensor(x: &Tensor, w: &DecoderWeights) -> Result<Tensor> {
    decode_traced(x, w).map(|(t, _)| t)
}

/// Decodes a relu4_1-shaped feature map into an RGB image. The output is
/// raw (unbounded); clamping happens only when an image is saved.
pub fn decode(fm: &FeatureMap, w: &DecoderWeights) -> Result<Image> {
    if fm.tap != Tap::Relu4_1 {
        return Err(Error::ShapeMismatch {
            left: format!("tap {}", fm.tap.name()),
            right: "tap relu4_1".into(),
        });
    }
    decode_tensor(&fm.tensor, w)?.to_image()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stylenet::weights::EncoderVariant;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_input(seed: u64, c: usize, h: usize, w: usize) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::from_vec(c, h, w, data).unwrap()
    }

    #[test]
    fn shape_contract_8x8_to_64x64() {
        let w = DecoderWeights::random(EncoderVariant::Tiny, 1);
        let x = rand_input(2, 256, 8, 8);
        let fm = FeatureMap::new(x, Tap::Relu4_1);
        let img = decode(&fm, &w).unwrap();
        assert_eq!((img.height(), img.width(), img.channels()), (64, 64, 3));
    }

    #[test]
    fn decode_is_deterministic() {
        let w = DecoderWeights::random(EncoderVariant::Tiny, 3);
        let x = rand_input(4, 256, 8, 8);
        let a = decode_tensor(&x, &w).unwrap();
        let b = decode_tensor(&x, &w).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn decode_matches_stepwise_layer_oracle() {
        let w = DecoderWeights::random(EncoderVariant::Tiny, 5);
        let x = rand_input(6, 256, 8, 8);
        let out = decode_tensor(&x, &w).unwrap();

        let s = w.negative_slope;
        let mut cur = x;
        for i in 0..9 {
            cur = w.layers[i].forward(&cur);
            if i < 8 {
                cur = leaky_relu(&cur, s);
                if [0usize, 4, 6].contains(&i) {
                    cur = upsample2_nearest(&cur);
                }
            }
        }
        for (a, b) in out.data().iter().zip(cur.data()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn wrong_channel_count_is_rejected() {
        let w = DecoderWeights::random(EncoderVariant::Tiny, 1);
        let x = rand_input(2, 128, 8, 8);
        assert!(matches!(
            decode_tensor(&x, &w),
            Err(Error::ChannelMismatch { .. })
        ));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut w = DecoderWeights::random(EncoderVariant::Tiny, 9);
        let x = rand_input(10, 256, 8, 8);
        let v = rand_input(11, 3, 64, 64);
        let loss = |w: &DecoderWeights, x: &Tensor| -> f64 {
            decode_tensor(x, w)
                .unwrap()
                .data()
                .iter()
                .zip(v.data())
                .map(|(&o, &vv)| o as f64 * vv as f64)
                .sum()
        };
        let (_, trace) = decode_traced(&x, &w).unwrap();
        let (grads, dx) = decoder_backward(&w, &trace, &v);

        // Small step: larger ones cross activation kinks eight layers deep
        // and the quadrature stops tracking the one-sided gradient.
        let h = 1e-3f32;
        for idx in [0usize, 101, 999, 5000] {
            let mut xp = x.clone();
            xp.data_mut()[idx] += h;
            let mut xm = x.clone();
            xm.data_mut()[idx] -= h;
            let fd = (loss(&w, &xp) - loss(&w, &xm)) / (2.0 * h as f64);
            let an = dx.data()[idx] as f64;
            assert!(
                (fd - an).abs() < 5e-2 * (1.0 + an.abs()),
                "dx[{idx}]: {an} vs {fd}"
            );
        }
        // Spot-check weight gradients on the first and last layers.
        for (layer, idx) in [(0usize, 7usize), (8, 3), (4, 100)] {
            let orig = w.layers[layer].weight[idx];
            w.layers[layer].weight[idx] = orig + h;
            let lp = loss(&w, &x);
            w.layers[layer].weight[idx] = orig - h;
            let lm = loss(&w, &x);
            w.layers[layer].weight[idx] = orig;
            let fd = (lp - lm) / (2.0 * h as f64);
            let an = grads.dw[layer][idx] as f64;
            assert!(
                (fd - an).abs() < 5e-2 * (1.0 + an.abs()),
                "dw[{layer}][{idx}]: {an} vs {fd}"
            );
        }
    }
}
