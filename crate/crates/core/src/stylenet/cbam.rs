//! Convolutional block attention: sequential channel and spatial
//! multiplicative gating of a feature map.

use crate::error::{Error, Result};
use crate::stylenet::ops::sigmoid;
use crate::stylenet::weights::CbamWeights;
use crate::tensor::{FeatureMap, Tensor};

pub(crate) struct CbamTrace {
    s_avg: Vec<f32>,
    s_max: Vec<f32>,
    /// Spatial argmax per channel (linear plane index).
    arg_sp: Vec<u32>,
    z1_avg: Vec<f32>,
    z1_max: Vec<f32>,
    h1_avg: Vec<f32>,
    h1_max: Vec<f32>,
    /// Channel mask, sigmoid output.
    mc: Vec<f32>,
    x1: Tensor,
    /// Stacked [channel-mean; channel-max] maps fed to the spatial conv.
    cat: Tensor,
    /// Channel argmax per pixel.
    arg_ch: Vec<u32>,
    /// Spatial mask, sigmoid output (1×H×W plane).
    ms: Vec<f32>,
}

pub(crate) struct CbamGrads {
    pub dw1: Vec<f32>,
    pub dw2: Vec<f32>,
    pub dspatial_w: Vec<f32>,
    pub dspatial_b: Vec<f32>,
}

impl CbamGrads {
    pub fn zeros(w: &CbamWeights) -> Self {
        Self {
            dw1: vec![0.0; w.mlp_w1.len()],
            dw2: vec![0.0; w.mlp_w2.len()],
            dspatial_w: vec![0.0; w.spatial.weight.len()],
            dspatial_b: vec![0.0; w.spatial.bias.len()],
        }
    }
}

fn mlp_forward(w: &CbamWeights, s: &[f32]) -> (Vec<f32>, Vec<f32>, Vec<f32>) {
    let (c, h) = (w.channels, w.hidden);
    let mut z1 = vec![0.0f32; h];
    for j in 0..h {
        let row = &w.mlp_w1[j * c..(j + 1) * c];
        z1[j] = row.iter().zip(s).map(|(a, b)| a * b).sum();
    }
    let h1: Vec<f32> = z1.iter().map(|&v| v.max(0.0)).collect();
    let mut z2 = vec![0.0f32; c];
    for ci in 0..c {
        let row = &w.mlp_w2[ci * h..(ci + 1) * h];
        z2[ci] = row.iter().zip(&h1).map(|(a, b)| a * b).sum();
    }
    (z1, h1, z2)
}

pub(crate) fn cbam_traced(x: &Tensor, w: &CbamWeights) -> Result<(Tensor, CbamTrace)> {
    let (c, h, wd) = x.shape();
    if c != w.channels {
        return Err(Error::ChannelMismatch {
            left: c,
            right: w.channels,
        });
    }
    let n = h * wd;
    if n == 0 {
        return Err(Error::EmptyFeatureMap);
    }

    // Channel attention.
    let mut s_avg = vec![0.0f32; c];
    let mut s_max = vec![f32::NEG_INFINITY; c];
    let mut arg_sp = vec![0u32; c];
    for ch in 0..c {
        let plane = x.plane(ch);
        let mut sum = 0.0f64;
        for (i, &v) in plane.iter().enumerate() {
            sum += v as f64;
            if v > s_max[ch] {
                s_max[ch] = v;
                arg_sp[ch] = i as u32;
            }
        }
        s_avg[ch] = (sum / n as f64) as f32;
    }
    let (z1_avg, h1_avg, z2_avg) = mlp_forward(w, &s_avg);
    let (z1_max, h1_max, z2_max) = mlp_forward(w, &s_max);
    let mc: Vec<f32> = z2_avg
        .iter()
        .zip(&z2_max)
        .map(|(&a, &b)| sigmoid(a + b))
        .collect();

    let mut x1 = x.clone();
    for ch in 0..c {
        let m = mc[ch];
        for v in x1.plane_mut(ch) {
            *v *= m;
        }
    }

    // Spatial attention.
    let mut cat = Tensor::zeros(2, h, wd);
    let mut arg_ch = vec![0u32; n];
    {
        let mut mean = vec![0.0f32; n];
        let mut maxv = vec![f32::NEG_INFINITY; n];
        for ch in 0..c {
            let plane = x1.plane(ch);
            for i in 0..n {
                mean[i] += plane[i];
                if plane[i] > maxv[i] {
                    maxv[i] = plane[i];
                    arg_ch[i] = ch as u32;
                }
            }
        }
        let inv_c = 1.0 / c as f32;
        let cat_data = cat.data_mut();
        for i in 0..n {
            cat_data[i] = mean[i] * inv_c;
            cat_data[n + i] = maxv[i];
        }
    }
    let zs = w.spatial.forward(&cat);
    let ms: Vec<f32> = zs.data().iter().map(|&v| sigmoid(v)).collect();

    let mut out = x1.clone();
    for ch in 0..c {
        let plane = out.plane_mut(ch);
        for i in 0..n {
            plane[i] *= ms[i];
        }
    }

    Ok((
        out,
        CbamTrace {
            s_avg,
            s_max,
            arg_sp,
            z1_avg,
            z1_max,
            h1_avg,
            h1_max,
            mc,
            x1,
            cat,
            arg_ch,
            ms,
        },
    ))
}

/// Backward through both gates; returns weight gradients and the gradient
/// w.r.t. the input feature map.
pub(crate) fn cbam_backward(
    x: &Tensor,
    w: &CbamWeights,
    trace: &CbamTrace,
    dy: &Tensor,
) -> (CbamGrads, Tensor) {
    let (c, h, wd) = x.shape();
    let n = h * wd;
    let mut grads = CbamGrads::zeros(w);

    // out = x1 ⊙ ms
    let mut dms = vec![0.0f32; n];
    let mut dx1 = Tensor::zeros(c, h, wd);
    for ch in 0..c {
        let dyp = dy.plane(ch);
        let x1p = trace.x1.plane(ch);
        let dx1p = dx1.plane_mut(ch);
        for i in 0..n {
            dms[i] += dyp[i] * x1p[i];
            dx1p[i] = dyp[i] * trace.ms[i];
        }
    }

    // ms = sigmoid(conv7(cat))
    let mut dzs = Tensor::zeros(1, h, wd);
    for i in 0..n {
        dzs.data_mut()[i] = dms[i] * trace.ms[i] * (1.0 - trace.ms[i]);
    }
    w.spatial
        .backward_params(&trace.cat, &dzs, &mut grads.dspatial_w, &mut grads.dspatial_b);
    let dcat = w.spatial.backward_input(&dzs);

    // cat = [channel-mean; channel-max] of x1
    let inv_c = 1.0 / c as f32;
    for ch in 0..c {
        let dx1p = dx1.plane_mut(ch);
        for i in 0..n {
            dx1p[i] += dcat.data()[i] * inv_c;
        }
    }
    for i in 0..n {
        let ch = trace.arg_ch[i] as usize;
        dx1.plane_mut(ch)[i] += dcat.data()[n + i];
    }

    // x1 = x ⊙ mc
    let mut dmc = vec![0.0f32; c];
    let mut dx = Tensor::zeros(c, h, wd);
    for ch in 0..c {
        let dx1p = dx1.plane(ch);
        let xp = x.plane(ch);
        let dxp = dx.plane_mut(ch);
        let mut acc = 0.0f64;
        for i in 0..n {
            acc += (dx1p[i] * xp[i]) as f64;
            dxp[i] = dx1p[i] * trace.mc[ch];
        }
        dmc[ch] = acc as f32;
    }

    // mc = sigmoid(mlp(avg) + mlp(max)), shared weights
    let dz: Vec<f32> = (0..c)
        .map(|ch| dmc[ch] * trace.mc[ch] * (1.0 - trace.mc[ch]))
        .collect();
    let hid = w.hidden;
    let mut ds_avg = vec![0.0f32; c];
    let mut ds_max = vec![0.0f32; c];
    for (branch, (z1, h1, ds)) in [
        (&trace.z1_avg, &trace.h1_avg, &mut ds_avg),
        (&trace.z1_max, &trace.h1_max, &mut ds_max),
    ]
    .into_iter()
    .enumerate()
    {
        let s = if branch == 0 { &trace.s_avg } else { &trace.s_max };
        let mut dh1 = vec![0.0f32; hid];
        for ch in 0..c {
            let g = dz[ch];
            let row = &w.mlp_w2[ch * hid..(ch + 1) * hid];
            for j in 0..hid {
                grads.dw2[ch * hid + j] += g * h1[j];
                dh1[j] += row[j] * g;
            }
        }
        let dz1: Vec<f32> = dh1
            .iter()
            .zip(z1)
            .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
            .collect();
        for j in 0..hid {
            let g = dz1[j];
            let row = &w.mlp_w1[j * c..(j + 1) * c];
            for ch in 0..c {
                grads.dw1[j * c + ch] += g * s[ch];
                ds[ch] += row[ch] * g;
            }
        }
    }

    // s_avg|s_max pooling backward
    let inv_n = 1.0 / n as f32;
    for ch in 0..c {
        let g = ds_avg[ch] * inv_n;
        for v in dx.plane_mut(ch) {
            *v += g;
        }
        let i = trace.arg_sp[ch] as usize;
        dx.plane_mut(ch)[i] += ds_max[ch];
    }

    (grads, dx)
}

pub(crate) fn cbam_forward(x: &Tensor, w: &CbamWeights) -> Result<Tensor> {
    cbam_traced(x, w).map(|(t, _)| t)
}

/// Refines encoded content features with channel then spatial attention;
/// shape is preserved.
pub fn cbam_refine(fm: &FeatureMap, w: &CbamWeights) -> Result<FeatureMap> {
    let out = cbam_forward(&fm.tensor, w)?;
    Ok(FeatureMap::new(out, fm.tap))
}
