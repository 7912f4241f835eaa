//! Frozen feed-forward encoder producing the four tap activations.
//!
//! Schedule (taps marked *): conv1_1* conv1_2 pool conv2_1* conv2_2 pool
//! conv3_1* conv3_2 conv3_3 conv3_4 pool conv4_1*.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::stylenet::ops::{maxpool2, maxpool2_backward, relu, relu_backward};
use crate::stylenet::weights::EncoderWeights;
use crate::tensor::{FeatureMap, Tap, Tensor};

/// Conv indices whose ReLU output is a tap.
const TAP_LAYERS: [usize; 4] = [0, 2, 4, 8];
/// Conv indices preceded by a 2×2 max pool on their input.
const POOL_BEFORE: [usize; 3] = [2, 4, 8];

fn check_dims(h: usize, w: usize) -> Result<()> {
    if h % 8 != 0 || w % 8 != 0 || h == 0 || w == 0 {
        return Err(Error::NotMultipleOf {
            op: "encode",
            multiple: 8,
            height: h,
            width: w,
        });
    }
    Ok(())
}

fn check_input(img: &Image) -> Result<Tensor> {
    if img.channels() != 3 {
        return Err(Error::ChannelMismatch {
            left: img.channels(),
            right: 3,
        });
    }
    check_dims(img.height(), img.width())?;
    Ok(Tensor::from_image(img))
}

/// Forward state kept for the backward pass: every ReLU output plus the
/// pooling argmaxes.
pub(crate) struct EncoderTrace {
    posts: Vec<Tensor>,
    pools: Vec<(Vec<u32>, usize, usize)>,
}

/// Tap activations without the backward trace (for frozen targets).
pub(crate) fn encode_taps_plain(x: &Tensor, w: &EncoderWeights) -> Result<Vec<Tensor>> {
    check_dims(x.height(), x.width())?;
    if x.channels() != 3 {
        return Err(Error::ChannelMismatch {
            left: x.channels(),
            right: 3,
        });
    }
    let mut taps = Vec::with_capacity(4);
    let mut cur = x.clone();
    for (i, conv) in w.layers.iter().enumerate() {
        if POOL_BEFORE.contains(&i) {
            let (pooled, _) = maxpool2(&cur);
            cur = pooled;
        }
        cur = relu(&conv.forward(&cur));
        if TAP_LAYERS.contains(&i) {
            taps.push(cur.clone());
        }
    }
    Ok(taps)
}

pub(crate) fn encode_taps_traced(
    x: &Tensor,
    w: &EncoderWeights,
) -> Result<(Vec<Tensor>, EncoderTrace)> {
    check_dims(x.height(), x.width())?;
    if x.channels() != 3 {
        return Err(Error::ChannelMismatch {
            left: x.channels(),
            right: 3,
        });
    }
    let mut posts = Vec::with_capacity(9);
    let mut pools = Vec::with_capacity(3);
    let mut taps = Vec::with_capacity(4);
    let mut cur = x.clone();
    for (i, conv) in w.layers.iter().enumerate() {
        if POOL_BEFORE.contains(&i) {
            let (h, wd) = (cur.height(), cur.width());
            let (pooled, arg) = maxpool2(&cur);
            pools.push((arg, h, wd));
            cur = pooled;
        }
        cur = relu(&conv.forward(&cur));
        posts.push(cur.clone());
        if TAP_LAYERS.contains(&i) {
            taps.push(cur.clone());
        }
    }
    Ok((taps, EncoderTrace { posts, pools }))
}

/// Pushes tap-level gradients back to the encoder input. The encoder is
/// frozen, so only the input gradient is produced.
pub(crate) fn encoder_backward_to_input(
    w: &EncoderWeights,
    trace: &EncoderTrace,
    d_taps: &[Option<&Tensor>; 4],
) -> Tensor {
    let last = &trace.posts[8];
    let mut g = Tensor::zeros(last.channels(), last.height(), last.width());
    let mut pool_idx = trace.pools.len();
    for i in (0..9).rev() {
        if let Some(t) = TAP_LAYERS.iter().position(|&l| l == i) {
            if let Some(dt) = d_taps[t] {
                for (a, b) in g.data_mut().iter_mut().zip(dt.data()) {
                    *a += b;
                }
            }
        }
        g = relu_backward(&trace.posts[i], &g);
        g = w.layers[i].backward_input(&g);
        if POOL_BEFORE.contains(&i) {
            pool_idx -= 1;
            let (arg, in_h, in_w) = &trace.pools[pool_idx];
            g = maxpool2_backward(arg, &g, *in_h, *in_w);
        }
    }
    g
}

/// Runs the encoder to the relu4_1 tap.
pub fn encode(img: &Image, w: &EncoderWeights) -> Result<FeatureMap> {
    let x = check_input(img)?;
    let (taps, _) = encode_taps_traced(&x, w)?;
    Ok(FeatureMap::new(taps.into_iter().nth(3).unwrap(), Tap::Relu4_1))
}

/// Runs the encoder once and returns all four tap activations.
pub fn encode_taps(img: &Image, w: &EncoderWeights) -> Result<Vec<FeatureMap>> {
    let x = check_input(img)?;
    let (taps, _) = encode_taps_traced(&x, w)?;
    Ok(taps
        .into_iter()
        .zip(Tap::ALL)
        .map(|(t, tap)| FeatureMap::new(t, tap))
        .collect())
}
