#![allow(dead_code)]

use gearfuse::nn::{ConvSpec, Tensor4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(dims: [usize; 4], r: &mut ChaCha8Rng) -> Tensor4 {
    Tensor4::from_fn(dims, |_| r.sample(StandardNormal))
}

/// Small integers keep every sum exact regardless of accumulation order.
pub fn small_ints(n: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-3i32..=3) as f64).collect()
}

/// Direct evaluation of y(i,j) = sum x(i*S + r*m - top, j*S + r*n - left) w(m,n)
/// with the output size taken from the ceil formula and any leftover zero
/// rows placed on the low side.
pub fn naive_conv(x: &Tensor4, w: &[f64], spec: &ConvSpec) -> Tensor4 {
    let [n, ci, h, wd] = x.dims();
    let (kh, kw) = spec.kernel;
    let (rh, rw) = spec.dilation;
    let s = spec.stride;
    let eh = kh + (kh - 1) * (rh - 1);
    let ew = kw + (kw - 1) * (rw - 1);
    let ceil_div = |a: usize, b: usize| (a + b - 1) / b;
    let oh = ceil_div(h + 2 * spec.padding.0 - eh, s) + 1;
    let ow = ceil_div(wd + 2 * spec.padding.1 - ew, s) + 1;
    let top = spec.padding.0 + (oh - 1) * s - (h + 2 * spec.padding.0 - eh);
    let left = spec.padding.1 + (ow - 1) * s - (wd + 2 * spec.padding.1 - ew);
    let co = spec.out_channels;
    let mut y = Tensor4::zeros([n, co, oh, ow]);
    for b in 0..n {
        for o in 0..co {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = 0.0;
                    for c in 0..ci {
                        for m in 0..kh {
                            for q in 0..kw {
                                let yi = (i * s + m * rh) as isize - top as isize;
                                let xj = (j * s + q * rw) as isize - left as isize;
                                if yi < 0 || xj < 0 || yi >= h as isize || xj >= wd as isize {
                                    continue;
                                }
                                acc += x.get(b, c, yi as usize, xj as usize) * w[((o * ci + c) * kh + m) * kw + q];
                            }
                        }
                    }
                    y.set(b, o, i, j, acc);
                }
            }
        }
    }
    y
}

/// Scatter form of the transposed convolution: every input pixel stamps its
/// kernel into the output at stride S, then p rows/cols are trimmed per side.
pub fn scatter_deconv(x: &Tensor4, w: &[f64], spec: &ConvSpec) -> Tensor4 {
    let [n, ci, h, wd] = x.dims();
    let (kh, kw) = spec.kernel;
    let s = spec.stride;
    let co = spec.out_channels;
    let (fh, fw) = ((h - 1) * s + kh, (wd - 1) * s + kw);
    let mut full = Tensor4::zeros([n, co, fh, fw]);
    for b in 0..n {
        for c in 0..ci {
            for i in 0..h {
                for j in 0..wd {
                    let v = x.get(b, c, i, j);
                    for o in 0..co {
                        for m in 0..kh {
                            for q in 0..kw {
                                let idx = (i * s + m, j * s + q);
                                let cur = full.get(b, o, idx.0, idx.1);
                                full.set(b, o, idx.0, idx.1, cur + v * w[((c * co + o) * kh + m) * kw + q]);
                            }
                        }
                    }
                }
            }
        }
    }
    let (ph, pw) = spec.padding;
    let mut y = Tensor4::zeros([n, co, fh - 2 * ph, fw - 2 * pw]);
    for b in 0..n {
        for o in 0..co {
            for i in 0..fh - 2 * ph {
                for j in 0..fw - 2 * pw {
                    y.set(b, o, i, j, full.get(b, o, i + ph, j + pw));
                }
            }
        }
    }
    y
}
