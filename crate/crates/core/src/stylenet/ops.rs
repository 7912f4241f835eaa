//! Forward and backward kernels for the encoder/decoder convnets: 3×3
//! convolution (reflect padding, stride 1), generic odd-k convolution,
//! ReLU / LeakyReLU, 2×2 max pooling and ×2 nearest-neighbour upsampling.
//!
//! Reflect padding keeps constant inputs exactly constant through every
//! layer, so degenerate frames stylize to flat images. Parallel loops
//! split on output channels only, so every accumulation order is fixed
//! and results are bit-reproducible.

use rayon::prelude::*;

use crate::image::reflect_index_i;
use crate::tensor::Tensor;

/// Copies a plane into a buffer with a `pad`-wide reflected border.
fn pad_reflect_plane(src: &[f32], h: usize, w: usize, pad: usize, dst: &mut [f32]) {
    let pw = w + 2 * pad;
    for py in 0..h + 2 * pad {
        let sy = reflect_index_i(py as isize - pad as isize, h);
        let drow = &mut dst[py * pw..(py + 1) * pw];
        let srow = &src[sy * w..(sy + 1) * w];
        for px in 0..pad {
            drow[px] = srow[reflect_index_i(px as isize - pad as isize, w)];
        }
        drow[pad..pad + w].copy_from_slice(srow);
        for px in 0..pad {
            drow[pad + w + px] = srow[reflect_index_i((w + px) as isize, w)];
        }
    }
}

/// Copies a plane into a buffer with a `pad`-wide zero border.
fn pad_zero_plane(src: &[f32], h: usize, w: usize, pad: usize, dst: &mut [f32]) {
    let pw = w + 2 * pad;
    dst.fill(0.0);
    for y in 0..h {
        dst[(y + pad) * pw + pad..(y + pad) * pw + pad + w]
            .copy_from_slice(&src[y * w..(y + 1) * w]);
    }
}

/// dst[y][x] += Σ k[ky][kx]·padded[y+ky][x+kx]: a valid 3×3 pass over a
/// padded plane, branch-free.
fn acc_valid3(dst: &mut [f32], padded: &[f32], k: &[f32], h: usize, w: usize) {
    let pw = w + 2;
    for y in 0..h {
        let r0 = &padded[y * pw..y * pw + w + 2];
        let r1 = &padded[(y + 1) * pw..(y + 1) * pw + w + 2];
        let r2 = &padded[(y + 2) * pw..(y + 2) * pw + w + 2];
        let d = &mut dst[y * w..(y + 1) * w];
        for x in 0..w {
            d[x] += k[0] * r0[x] + k[1] * r0[x + 1] + k[2] * r0[x + 2]
                + k[3] * r1[x] + k[4] * r1[x + 1] + k[5] * r1[x + 2]
                + k[6] * r2[x] + k[7] * r2[x + 1] + k[8] * r2[x + 2];
        }
    }
}

/// 3×3 convolution, stride 1, reflect padding 1 (spatial dims preserved).
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3x3 {
    pub in_ch: usize,
    pub out_ch: usize,
    /// `[out][in][3][3]`, row-major.
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv3x3 {
    pub fn zeros(in_ch: usize, out_ch: usize) -> Self {
        Self {
            in_ch,
            out_ch,
            weight: vec![0.0; out_ch * in_ch * 9],
            bias: vec![0.0; out_ch],
        }
    }

    fn padded_planes(x: &Tensor, pad: usize, reflect: bool) -> Vec<f32> {
        let (c, h, w) = x.shape();
        let plane = (h + 2 * pad) * (w + 2 * pad);
        let mut buf = vec![0.0f32; c * plane];
        for ci in 0..c {
            let dst = &mut buf[ci * plane..(ci + 1) * plane];
            if reflect {
                pad_reflect_plane(x.plane(ci), h, w, pad, dst);
            } else {
                pad_zero_plane(x.plane(ci), h, w, pad, dst);
            }
        }
        buf
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let (cin, h, w) = x.shape();
        assert_eq!(cin, self.in_ch, "conv3x3 input channels");
        let padded = Self::padded_planes(x, 1, true);
        let pplane = (h + 2) * (w + 2);
        let mut out = Tensor::zeros(self.out_ch, h, w);
        out.data_mut()
            .par_chunks_mut(h * w)
            .enumerate()
            .for_each(|(co, op)| {
                op.fill(self.bias[co]);
                for ci in 0..cin {
                    let base = (co * cin + ci) * 9;
                    acc_valid3(
                        op,
                        &padded[ci * pplane..(ci + 1) * pplane],
                        &self.weight[base..base + 9],
                        h,
                        w,
                    );
                }
            });
        out
    }

    /// Gradient w.r.t. the input: full correlation with the flipped kernel
    /// into the padded frame, then the reflected border rows/columns fold
    /// back onto their interior sources.
    pub fn backward_input(&self, dy: &Tensor) -> Tensor {
        let (cout, h, w) = dy.shape();
        assert_eq!(cout, self.out_ch, "conv3x3 grad channels");
        let cin = self.in_ch;
        // Zero-pad dy by 2 so the (h+2)x(w+2) padded-input gradient is a
        // plain valid pass.
        let dy_padded = Self::padded_planes(dy, 2, false);
        let zplane = (h + 4) * (w + 4);
        let (gh, gw) = (h + 2, w + 2);

        let mut dx = Tensor::zeros(cin, h, w);
        dx.data_mut()
            .par_chunks_mut(h * w)
            .enumerate()
            .for_each(|(ci, dxp)| {
                let mut dpad = vec![0.0f32; gh * gw];
                for co in 0..cout {
                    let base = (co * cin + ci) * 9;
                    let k = &self.weight[base..base + 9];
                    let flipped = [k[8], k[7], k[6], k[5], k[4], k[3], k[2], k[1], k[0]];
                    // valid pass of the zero-padded gradient at the padded size
                    let zp = &dy_padded[co * zplane..(co + 1) * zplane];
                    let pw = gw + 2;
                    for y in 0..gh {
                        let r0 = &zp[y * pw..y * pw + gw + 2];
                        let r1 = &zp[(y + 1) * pw..(y + 1) * pw + gw + 2];
                        let r2 = &zp[(y + 2) * pw..(y + 2) * pw + gw + 2];
                        let d = &mut dpad[y * gw..(y + 1) * gw];
                        for x in 0..gw {
                            d[x] += flipped[0] * r0[x]
                                + flipped[1] * r0[x + 1]
                                + flipped[2] * r0[x + 2]
                                + flipped[3] * r1[x]
                                + flipped[4] * r1[x + 1]
                                + flipped[5] * r1[x + 2]
                                + flipped[6] * r2[x]
                                + flipped[7] * r2[x + 1]
                                + flipped[8] * r2[x + 2];
                        }
                    }
                }
                // Fold the padded frame back through the reflection map.
                for py in 0..gh {
                    let sy = reflect_index_i(py as isize - 1, h);
                    for px in 0..gw {
                        let sx = reflect_index_i(px as isize - 1, w);
                        dxp[sy * w + sx] += dpad[py * gw + px];
                    }
                }
            });
        dx
    }

    /// Accumulates weight/bias gradients into `dw`/`db`.
    pub fn backward_params(&self, x: &Tensor, dy: &Tensor, dw: &mut [f32], db: &mut [f32]) {
        let (cin, h, w) = x.shape();
        assert_eq!(dw.len(), self.weight.len());
        assert_eq!(db.len(), self.bias.len());
        let padded = Self::padded_planes(x, 1, true);
        let pplane = (h + 2) * (w + 2);
        let pw = w + 2;
        dw.par_chunks_mut(cin * 9).enumerate().for_each(|(co, dwc)| {
            let dyp = dy.plane(co);
            for ci in 0..cin {
                let xp = &padded[ci * pplane..(ci + 1) * pplane];
                for ky in 0..3usize {
                    let mut s0 = 0.0f32;
                    let mut s1 = 0.0f32;
                    let mut s2 = 0.0f32;
                    for y in 0..h {
                        let dyr = &dyp[y * w..(y + 1) * w];
                        let xr = &xp[(y + ky) * pw..(y + ky) * pw + w + 2];
                        for (d, (a, (b, c))) in dyr
                            .iter()
                            .zip(xr.iter().zip(xr[1..].iter().zip(&xr[2..])))
                        {
                            s0 += d * a;
                            s1 += d * b;
                            s2 += d * c;
                        }
                    }
                    dwc[ci * 9 + ky * 3] += s0;
                    dwc[ci * 9 + ky * 3 + 1] += s1;
                    dwc[ci * 9 + ky * 3 + 2] += s2;
                }
            }
        });
        for co in 0..self.out_ch {
            db[co] += dy.plane(co).iter().sum::<f32>();
        }
    }
}

/// Odd-k convolution with reflect padding k/2; naive loops, used for the
/// small spatial-attention kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKxK {
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    /// `[out][in][k][k]`.
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ConvKxK {
    pub fn zeros(in_ch: usize, out_ch: usize, k: usize) -> Self {
        assert!(k % 2 == 1, "kernel size must be odd");
        Self {
            in_ch,
            out_ch,
            k,
            weight: vec![0.0; out_ch * in_ch * k * k],
            bias: vec![0.0; out_ch],
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let (cin, h, w) = x.shape();
        assert_eq!(cin, self.in_ch);
        let pad = (self.k / 2) as isize;
        let mut out = Tensor::zeros(self.out_ch, h, w);
        for co in 0..self.out_ch {
            for y in 0..h {
                for x0 in 0..w {
                    let mut acc = self.bias[co];
                    for ci in 0..cin {
                        let kbase = (co * cin + ci) * self.k * self.k;
                        for ky in 0..self.k {
                            let ys = reflect_index_i(y as isize + ky as isize - pad, h);
                            for kx in 0..self.k {
                                let xs = reflect_index_i(x0 as isize + kx as isize - pad, w);
                                acc += self.weight[kbase + ky * self.k + kx] * x.get(ci, ys, xs);
                            }
                        }
                    }
                    out.set(co, y, x0, acc);
                }
            }
        }
        out
    }

    pub fn backward_input(&self, dy: &Tensor) -> Tensor {
        let (_, h, w) = dy.shape();
        let pad = (self.k / 2) as isize;
        let mut dx = Tensor::zeros(self.in_ch, h, w);
        for co in 0..self.out_ch {
            for y in 0..h {
                for x0 in 0..w {
                    let g = dy.get(co, y, x0);
                    if g == 0.0 {
                        continue;
                    }
                    for ci in 0..self.in_ch {
                        let kbase = (co * self.in_ch + ci) * self.k * self.k;
                        for ky in 0..self.k {
                            let ys = reflect_index_i(y as isize + ky as isize - pad, h);
                            for kx in 0..self.k {
                                let xs = reflect_index_i(x0 as isize + kx as isize - pad, w);
                                let v = dx.get(ci, ys, xs)
                                    + g * self.weight[kbase + ky * self.k + kx];
                                dx.set(ci, ys, xs, v);
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    pub fn backward_params(&self, x: &Tensor, dy: &Tensor, dw: &mut [f32], db: &mut [f32]) {
        let (cin, h, w) = x.shape();
        let pad = (self.k / 2) as isize;
        for co in 0..self.out_ch {
            for y in 0..h {
                for x0 in 0..w {
                    let g = dy.get(co, y, x0);
                    if g == 0.0 {
                        continue;
                    }
                    db[co] += g;
                    for ci in 0..cin {
                        let kbase = (co * cin + ci) * self.k * self.k;
                        for ky in 0..self.k {
                            let ys = reflect_index_i(y as isize + ky as isize - pad, h);
                            for kx in 0..self.k {
                                let xs = reflect_index_i(x0 as isize + kx as isize - pad, w);
                                dw[kbase + ky * self.k + kx] += g * x.get(ci, ys, xs);
                            }
                        }
                    }
                }
            }
        }
    }
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// `post` is the forward ReLU output; positive entries pass gradient through.
pub fn relu_backward(post: &Tensor, dy: &Tensor) -> Tensor {
    let mut dx = dy.clone();
    for (d, &p) in dx.data_mut().iter_mut().zip(post.data()) {
        if p <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}

pub fn leaky_relu(x: &Tensor, slope: f32) -> Tensor {
    let mut out = x.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v *= slope;
        }
    }
    out
}

pub fn leaky_relu_backward(post: &Tensor, dy: &Tensor, slope: f32) -> Tensor {
    let mut dx = dy.clone();
    for (d, &p) in dx.data_mut().iter_mut().zip(post.data()) {
        if p <= 0.0 {
            *d *= slope;
        }
    }
    dx
}

/// 2×2 max pooling, stride 2. Returns the pooled tensor and per-output
/// argmax indices (linear into the input plane) for the backward pass.
pub fn maxpool2(x: &Tensor) -> (Tensor, Vec<u32>) {
    let (c, h, w) = x.shape();
    assert!(h % 2 == 0 && w % 2 == 0, "maxpool2 needs even dims");
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(c, oh, ow);
    let mut arg = vec![0u32; c * oh * ow];
    for ch in 0..c {
        let xp = x.plane(ch);
        for y in 0..oh {
            for x0 in 0..ow {
                let mut best = f32::NEG_INFINITY;
                let mut best_i = 0usize;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let i = (2 * y + dy) * w + 2 * x0 + dx;
                        if xp[i] > best {
                            best = xp[i];
                            best_i = i;
                        }
                    }
                }
                out.set(ch, y, x0, best);
                arg[(ch * oh + y) * ow + x0] = best_i as u32;
            }
        }
    }
    (out, arg)
}

pub fn maxpool2_backward(arg: &[u32], dy: &Tensor, in_h: usize, in_w: usize) -> Tensor {
    let (c, oh, ow) = dy.shape();
    let mut dx = Tensor::zeros(c, in_h, in_w);
    for ch in 0..c {
        let dxp = dx.plane_mut(ch);
        let dyp = dy.plane(ch);
        for i in 0..oh * ow {
            dxp[arg[ch * oh * ow + i] as usize] += dyp[i];
        }
    }
    dx
}

pub fn upsample2_nearest(x: &Tensor) -> Tensor {
    let (c, h, w) = x.shape();
    let mut out = Tensor::zeros(c, h * 2, w * 2);
    for ch in 0..c {
        for y in 0..h * 2 {
            let src = x.row(ch, y / 2);
            let dst_base = (ch * h * 2 + y) * w * 2;
            let dst = &mut out.data_mut()[dst_base..dst_base + w * 2];
            for x0 in 0..w * 2 {
                dst[x0] = src[x0 / 2];
            }
        }
    }
    out
}

pub fn upsample2_backward(dy: &Tensor) -> Tensor {
    let (c, h2, w2) = dy.shape();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut dx = Tensor::zeros(c, h, w);
    for ch in 0..c {
        for y in 0..h2 {
            let src = dy.row(ch, y);
            let dst_base = (ch * h + y / 2) * w;
            for x0 in 0..w2 {
                dx.data_mut()[dst_base + x0 / 2] += src[x0];
            }
        }
    }
    dx
}

#[inline]
pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}
