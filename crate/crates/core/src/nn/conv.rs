//! Strided / dilated convolution and transposed convolution via im2col + GEMM.
//!
//! Orientation is cross-correlation. Output size of a convolution is
//! `ceil((H + 2p - E) / S + 1)` with `E = K + (K - 1)(r - 1)`; when the stride
//! does not divide `H + 2p - E` the missing zero rows are added on the low
//! side (top / left).

use rayon::prelude::*;

use super::tensor::Tensor4;
use crate::error::{invalid, shape, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: usize,
    pub dilation: (usize, usize),
    pub padding: (usize, usize),
    pub transposed: bool,
}

impl ConvSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel: (kernel, kernel),
            stride: 1,
            dilation: (1, 1),
            padding: (0, 0),
            transposed: false,
        }
    }

    pub fn stride(mut self, s: usize) -> Self {
        self.stride = s;
        self
    }

    pub fn dilation(mut self, r: usize) -> Self {
        self.dilation = (r, r);
        self
    }

    pub fn padding(mut self, p: usize) -> Self {
        self.padding = (p, p);
        self
    }

    pub fn kernel_hw(mut self, kh: usize, kw: usize) -> Self {
        self.kernel = (kh, kw);
        self
    }

    pub fn padding_hw(mut self, ph: usize, pw: usize) -> Self {
        self.padding = (ph, pw);
        self
    }

    pub fn transposed(mut self) -> Self {
        self.transposed = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.in_channels,
            self.out_channels,
            self.kernel.0,
            self.kernel.1,
            self.stride,
            self.dilation.0,
            self.dilation.1,
        ];
        if positive.contains(&0) {
            return Err(invalid(format!("conv spec fields must be >= 1: {self:?}")));
        }
        if self.transposed && self.dilation != (1, 1) {
            return Err(invalid("transposed convolution does not take dilation"));
        }
        Ok(())
    }

    /// Effective kernel extent `K + (K - 1)(r - 1)` per axis.
    pub fn extent(&self) -> (usize, usize) {
        (
            self.kernel.0 + (self.kernel.0 - 1) * (self.dilation.0 - 1),
            self.kernel.1 + (self.kernel.1 - 1) * (self.dilation.1 - 1),
        )
    }

    pub fn weight_len(&self) -> usize {
        self.in_channels * self.out_channels * self.kernel.0 * self.kernel.1
    }

    /// Output spatial size for an input of `h x w`.
    pub fn output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        self.validate()?;
        if self.transposed {
            let oh = (h - 1) * self.stride + self.kernel.0;
            let ow = (w - 1) * self.stride + self.kernel.1;
            if oh <= 2 * self.padding.0 || ow <= 2 * self.padding.1 {
                return Err(shape("transposed convolution padding removes the whole output"));
            }
            return Ok((oh - 2 * self.padding.0, ow - 2 * self.padding.1));
        }
        let g = self.geometry(h, w)?;
        Ok((g.oh, g.ow))
    }

    fn geometry(&self, h: usize, w: usize) -> Result<Geometry> {
        let (eh, ew) = self.extent();
        let axis = |n: usize, p: usize, e: usize| -> Result<(usize, usize)> {
            let span = n + 2 * p;
            if span < e {
                return Err(shape(format!(
                    "kernel extent {e} exceeds padded input {span}"
                )));
            }
            let d = span - e;
            let out = d.div_ceil(self.stride) + 1;
            let extra = (out - 1) * self.stride - d;
            Ok((out, p + extra))
        };
        let (oh, top) = axis(h, self.padding.0, eh)?;
        let (ow, left) = axis(w, self.padding.1, ew)?;
        Ok(Geometry { h, w, oh, ow, top, left })
    }

    /// Forward geometry of the convolution whose adjoint this transposed spec
    /// computes: input `oh x ow` (the transposed output) to `h x w`.
    fn transposed_geometry(&self, h: usize, w: usize) -> Result<Geometry> {
        let (oh, ow) = self.output_size(h, w)?;
        Ok(Geometry { h: oh, w: ow, oh: h, ow: w, top: self.padding.0, left: self.padding.1 })
    }
}

/// Placement of kernel windows: input `h x w`, output `oh x ow`, and the
/// zero padding before the first row / column.
#[derive(Debug, Clone, Copy)]
struct Geometry {
    h: usize,
    w: usize,
    oh: usize,
    ow: usize,
    top: usize,
    left: usize,
}

/// Output columns `[lo, hi)` whose input column `ox * s + off` lies in `0..w`.
fn valid_span(ow: usize, s: usize, off: isize, w: usize) -> (usize, usize) {
    let lo = if off >= 0 { 0 } else { ((-off) as usize).div_ceil(s) };
    let end = w as isize - off;
    let hi = if end <= 0 { 0 } else { (end as usize).div_ceil(s).min(ow) };
    (lo.min(hi), hi)
}

/// Unfolds one sample (`c x h x w`) into `[c*kh*kw, oh*ow]`.
fn im2col(x: &[f64], c: usize, spec: &ConvSpec, g: &Geometry, cols: &mut [f64]) {
    let (kh, kw) = spec.kernel;
    let (rh, rw) = spec.dilation;
    let s = spec.stride;
    let plane = g.oh * g.ow;
    for ci in 0..c {
        let xc = &x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for m in 0..kh {
            for n in 0..kw {
                let row = &mut cols[((ci * kh + m) * kw + n) * plane..][..plane];
                let off = (n * rw) as isize - g.left as isize;
                let (lo, hi) = valid_span(g.ow, s, off, g.w);
                for oy in 0..g.oh {
                    let iy = (oy * s + m * rh) as isize - g.top as isize;
                    let out = &mut row[oy * g.ow..(oy + 1) * g.ow];
                    if iy < 0 || iy as usize >= g.h || lo == hi {
                        out.fill(0.0);
                        continue;
                    }
                    let xr = &xc[iy as usize * g.w..(iy as usize + 1) * g.w];
                    out[..lo].fill(0.0);
                    out[hi..].fill(0.0);
                    let base = (lo * s) as isize + off;
                    let src = &xr[base as usize..];
                    if s == 1 {
                        out[lo..hi].copy_from_slice(&src[..hi - lo]);
                    } else {
                        for (k, o) in out[lo..hi].iter_mut().enumerate() {
                            *o = src[k * s];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-adds columns back into `c x h x w`.
fn col2im(cols: &[f64], c: usize, spec: &ConvSpec, g: &Geometry, x: &mut [f64]) {
    let (kh, kw) = spec.kernel;
    let (rh, rw) = spec.dilation;
    let s = spec.stride;
    let plane = g.oh * g.ow;
    x.fill(0.0);
    for ci in 0..c {
        let xc = &mut x[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for m in 0..kh {
            for n in 0..kw {
                let row = &cols[((ci * kh + m) * kw + n) * plane..][..plane];
                let off = (n * rw) as isize - g.left as isize;
                let (lo, hi) = valid_span(g.ow, s, off, g.w);
                if lo == hi {
                    continue;
                }
                for oy in 0..g.oh {
                    let iy = (oy * s + m * rh) as isize - g.top as isize;
                    if iy < 0 || iy as usize >= g.h {
                        continue;
                    }
                    let xr = &mut xc[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let base = ((lo * s) as isize + off) as usize;
                    let src = &row[oy * g.ow + lo..oy * g.ow + hi];
                    if s == 1 {
                        xr[base..base + src.len()].iter_mut().zip(src).for_each(|(a, b)| *a += b);
                    } else {
                        for (k, v) in src.iter().enumerate() {
                            xr[base + k * s] += v;
                        }
                    }
                }
            }
        }
    }
}

/// True when the unfolded matrix equals the input itself.
fn is_pointwise(spec: &ConvSpec) -> bool {
    spec.kernel == (1, 1) && spec.stride == 1 && spec.padding == (0, 0)
}

/// `c = alpha * op(a) * op(b) + beta * c` with `op(a)` m x k and `op(b)` k x n.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool, beta: f64, c: &mut [f64]) {
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: slices are at least as long as the strided views require.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1,
        );
    }
}

fn check_input(x: &Tensor4, channels: usize) -> Result<()> {
    if x.c() != channels {
        return Err(shape(format!("expected {channels} input channels, got {}", x.c())));
    }
    Ok(())
}

fn check_weights(weights: &[f64], spec: &ConvSpec) -> Result<()> {
    if weights.len() != spec.weight_len() {
        return Err(shape(format!(
            "{} weights for a spec needing {}",
            weights.len(),
            spec.weight_len()
        )));
    }
    Ok(())
}

/// Convolution with weights laid out `[out, in, kh, kw]`.
pub fn conv2d(x: &Tensor4, weights: &[f64], bias: Option<&[f64]>, spec: &ConvSpec) -> Result<Tensor4> {
    spec.validate()?;
    if spec.transposed {
        return Err(invalid("conv2d given a transposed spec"));
    }
    check_input(x, spec.in_channels)?;
    check_weights(weights, spec)?;
    let g = spec.geometry(x.h(), x.w())?;
    let (co, ci) = (spec.out_channels, spec.in_channels);
    let kk = ci * spec.kernel.0 * spec.kernel.1;
    let plane = g.oh * g.ow;
    let mut out = vec![0.0; x.n() * co * plane];
    out.par_chunks_mut(co * plane).enumerate().for_each(|(i, y)| {
        if is_pointwise(spec) {
            gemm(co, kk, plane, weights, false, x.sample(i), false, 0.0, y);
        } else {
            let mut cols = vec![0.0; kk * plane];
            im2col(x.sample(i), ci, spec, &g, &mut cols);
            gemm(co, kk, plane, weights, false, &cols, false, 0.0, y);
        }
        if let Some(b) = bias {
            for (o, bo) in b.iter().enumerate() {
                y[o * plane..(o + 1) * plane].iter_mut().for_each(|v| *v += bo);
            }
        }
    });
    Tensor4::new([x.n(), co, g.oh, g.ow], out)
}

/// Gradients of [`conv2d`] with respect to input and weights.
pub fn conv2d_backward(x: &Tensor4, weights: &[f64], spec: &ConvSpec, upstream: &Tensor4) -> Result<(Tensor4, Vec<f64>)> {
    spec.validate()?;
    check_input(x, spec.in_channels)?;
    check_weights(weights, spec)?;
    let g = spec.geometry(x.h(), x.w())?;
    let (co, ci) = (spec.out_channels, spec.in_channels);
    upstream.expect_dims([x.n(), co, g.oh, g.ow])?;
    let kk = ci * spec.kernel.0 * spec.kernel.1;
    let plane = g.oh * g.ow;
    let mut dx = vec![0.0; x.len()];
    let dw = dx
        .par_chunks_mut(ci * g.h * g.w)
        .enumerate()
        .map(|(i, dxs)| {
            let gy = upstream.sample(i);
            let mut dw = vec![0.0; co * kk];
            if is_pointwise(spec) {
                gemm(co, plane, kk, gy, false, x.sample(i), true, 0.0, &mut dw);
                gemm(kk, co, plane, weights, true, gy, false, 0.0, dxs);
            } else {
                let mut cols = vec![0.0; kk * plane];
                im2col(x.sample(i), ci, spec, &g, &mut cols);
                gemm(co, plane, kk, gy, false, &cols, true, 0.0, &mut dw);
                gemm(kk, co, plane, weights, true, gy, false, 0.0, &mut cols);
                col2im(&cols, ci, spec, &g, dxs);
            }
            dw
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(vec![0.0; co * kk], add_into);
    Ok((Tensor4::new(x.dims(), dx)?, dw))
}

fn add_into(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
    a
}

/// Transposed convolution with weights laid out `[in, out, kh, kw]`; the
/// adjoint of the stride-`S` convolution sharing the same weight array.
/// Output `(H - 1) * S + K - 2p` per axis.
pub fn deconv2d(x: &Tensor4, weights: &[f64], bias: Option<&[f64]>, spec: &ConvSpec) -> Result<Tensor4> {
    spec.validate()?;
    if !spec.transposed {
        return Err(invalid("deconv2d needs a transposed spec"));
    }
    check_input(x, spec.in_channels)?;
    check_weights(weights, spec)?;
    let g = spec.transposed_geometry(x.h(), x.w())?;
    let (ci, co) = (spec.in_channels, spec.out_channels);
    let kk = co * spec.kernel.0 * spec.kernel.1;
    let plane = x.h() * x.w();
    let mut out = vec![0.0; x.n() * co * g.h * g.w];
    out.par_chunks_mut(co * g.h * g.w).enumerate().for_each(|(i, y)| {
        let mut cols = vec![0.0; kk * plane];
        gemm(kk, ci, plane, weights, true, x.sample(i), false, 0.0, &mut cols);
        col2im(&cols, co, spec, &g, y);
        if let Some(b) = bias {
            let hw = g.h * g.w;
            for (o, bo) in b.iter().enumerate() {
                y[o * hw..(o + 1) * hw].iter_mut().for_each(|v| *v += bo);
            }
        }
    });
    Tensor4::new([x.n(), co, g.h, g.w], out)
}

pub fn deconv2d_backward(x: &Tensor4, weights: &[f64], spec: &ConvSpec, upstream: &Tensor4) -> Result<(Tensor4, Vec<f64>)> {
    spec.validate()?;
    check_input(x, spec.in_channels)?;
    check_weights(weights, spec)?;
    let g = spec.transposed_geometry(x.h(), x.w())?;
    let (ci, co) = (spec.in_channels, spec.out_channels);
    upstream.expect_dims([x.n(), co, g.h, g.w])?;
    let kk = co * spec.kernel.0 * spec.kernel.1;
    let plane = x.h() * x.w();
    let mut dx = vec![0.0; x.len()];
    let dw = dx
        .par_chunks_mut(ci * plane)
        .enumerate()
        .map(|(i, dxs)| {
            let mut cols = vec![0.0; kk * plane];
            im2col(upstream.sample(i), co, spec, &g, &mut cols);
            gemm(ci, kk, plane, weights, false, &cols, false, 0.0, dxs);
            let mut dw = vec![0.0; ci * kk];
            gemm(ci, plane, kk, x.sample(i), false, &cols, true, 0.0, &mut dw);
            dw
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(vec![0.0; ci * kk], add_into);
    Ok((Tensor4::new(x.dims(), dx)?, dw))
}

/// Sum of `g` over batch and space, per channel (bias gradient).
pub fn channel_sums(g: &Tensor4) -> Vec<f64> {
    let hw = g.h() * g.w();
    let mut out = vec![0.0; g.c()];
    for i in 0..g.n() {
        for (c, chunk) in g.sample(i).chunks_exact(hw).enumerate() {
            out[c] += chunk.iter().sum::<f64>();
        }
    }
    out
}
