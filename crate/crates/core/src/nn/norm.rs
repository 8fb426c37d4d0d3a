use super::tensor::Tensor4;
use super::{Layer, LayerRecord, Param};
use crate::error::{invalid, shape, Result};

/// Per-channel batch normalization, `y = gamma * x_hat + beta`.
pub struct BatchNorm2d {
    pub channels: usize,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub eps: f64,
    pub momentum: f64,
    cache: Option<Cache>,
}

struct Cache {
    x_hat: Tensor4,
    inv_std: Vec<f64>,
}

impl BatchNorm2d {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: Param::new(vec![1.0; channels]),
            beta: Param::new(vec![0.0; channels]),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            eps: 1e-5,
            momentum: 0.1,
            cache: None,
        }
    }

    /// Normalized input of the last training forward pass.
    pub fn last_normalized(&self) -> Option<&Tensor4> {
        self.cache.as_ref().map(|c| &c.x_hat)
    }
}

/// Four-lane sum; keeps the reduction vectorizable.
fn sum(p: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut it = p.chunks_exact(4);
    for c in &mut it {
        for k in 0..4 {
            acc[k] += c[k];
        }
    }
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + it.remainder().iter().sum::<f64>()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

fn centered_sq(p: &[f64], mean: f64) -> f64 {
    let mut acc = [0.0; 4];
    let mut it = p.chunks_exact(4);
    for c in &mut it {
        for k in 0..4 {
            let d = c[k] - mean;
            acc[k] += d * d;
        }
    }
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + it.remainder().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
}

impl Layer for BatchNorm2d {
    fn forward(&mut self, x: &Tensor4, train: bool) -> Result<Tensor4> {
        if x.c() != self.channels {
            return Err(shape(format!("batch norm over {} channels got {}", self.channels, x.c())));
        }
        let hw = x.h() * x.w();
        let m = x.n() * hw;
        let (mean, var) = if train {
            if m < 2 {
                return Err(invalid("batch norm needs at least 2 values per channel in training"));
            }
            let mut mean = vec![0.0; self.channels];
            for (i, p) in x.data().chunks_exact(hw).enumerate() {
                mean[i % self.channels] += sum(p);
            }
            mean.iter_mut().for_each(|v| *v /= m as f64);
            let mut var = vec![0.0; self.channels];
            for (i, p) in x.data().chunks_exact(hw).enumerate() {
                let c = i % self.channels;
                var[c] += centered_sq(p, mean[c]);
            }
            var.iter_mut().for_each(|v| *v /= m as f64);
            for c in 0..self.channels {
                let unbiased = var[c] * m as f64 / (m - 1) as f64;
                self.running_mean[c] = (1.0 - self.momentum) * self.running_mean[c] + self.momentum * mean[c];
                self.running_var[c] = (1.0 - self.momentum) * self.running_var[c] + self.momentum * unbiased;
            }
            (mean, var)
        } else {
            (self.running_mean.clone(), self.running_var.clone())
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut y = vec![0.0; x.len()];
        let planes = x.data().chunks_exact(hw).zip(y.chunks_exact_mut(hw)).enumerate();
        if train {
            let mut x_hat = vec![0.0; x.len()];
            for ((i, (p, yp)), hp) in planes.zip(x_hat.chunks_exact_mut(hw)) {
                let c = i % self.channels;
                let (mu, k, g, b) = (mean[c], inv_std[c], self.gamma.value[c], self.beta.value[c]);
                for ((v, h), o) in p.iter().zip(hp.iter_mut()).zip(yp.iter_mut()) {
                    *h = (v - mu) * k;
                    *o = g * *h + b;
                }
            }
            self.cache = Some(Cache { x_hat: Tensor4::new(x.dims(), x_hat)?, inv_std });
        } else {
            for (i, (p, yp)) in planes {
                let c = i % self.channels;
                let k = inv_std[c] * self.gamma.value[c];
                let b = self.beta.value[c] - mean[c] * k;
                yp.iter_mut().zip(p).for_each(|(o, v)| *o = v * k + b);
            }
        }
        Tensor4::new(x.dims(), y)
    }

    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let cache = self.cache.as_ref().ok_or_else(|| invalid("batch norm: backward called before forward"))?;
        grad.expect_dims(cache.x_hat.dims())?;
        let hw = grad.h() * grad.w();
        let m = (grad.n() * hw) as f64;
        let mut dgamma = vec![0.0; self.channels];
        let mut dbeta = vec![0.0; self.channels];
        let planes = || grad.data().chunks_exact(hw).zip(cache.x_hat.data().chunks_exact(hw)).enumerate();
        for (i, (g, h)) in planes() {
            let c = i % self.channels;
            dbeta[c] += sum(g);
            dgamma[c] += dot(g, h);
        }
        let mut dx = vec![0.0; grad.len()];
        for ((i, (g, h)), d) in planes().zip(dx.chunks_exact_mut(hw)) {
            let c = i % self.channels;
            let k = self.gamma.value[c] * cache.inv_std[c] / m;
            let (db, dg) = (dbeta[c], dgamma[c]);
            for ((o, gi), hi) in d.iter_mut().zip(g).zip(h) {
                *o = k * (m * gi - db - hi * dg);
            }
        }
        self.gamma.accumulate(&dgamma);
        self.beta.accumulate(&dbeta);
        Tensor4::new(grad.dims(), dx)
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }

    fn records(&self, out: &mut Vec<LayerRecord>) {
        out.push(LayerRecord {
            tag: LayerRecord::BATCHNORM,
            spec: vec![self.channels as u32],
            arrays: vec![
                self.gamma.value.clone(),
                self.beta.value.clone(),
                self.running_mean.clone(),
                self.running_var.clone(),
            ],
        });
    }

    fn load_records(&mut self, it: &mut dyn Iterator<Item = LayerRecord>) -> Result<()> {
        let arrays = LayerRecord::take(it, LayerRecord::BATCHNORM, &[self.channels as u32])?;
        let [gamma, beta, mean, var]: [Vec<f64>; 4] =
            arrays.try_into().map_err(|_| shape("batch norm record needs 4 arrays"))?;
        if mean.len() != self.channels || var.len() != self.channels {
            return Err(shape("batch norm running stats have the wrong length"));
        }
        if var.iter().any(|v| *v < 0.0) {
            return Err(invalid("negative running variance in checkpoint"));
        }
        self.gamma.load(gamma)?;
        self.beta.load(beta)?;
        self.running_mean = mean;
        self.running_var = var;
        Ok(())
    }
}
