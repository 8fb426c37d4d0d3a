use std::sync::Arc;

use crate::error::{invalid, shape, Result};

/// Dense NCHW tensor of f64, row-major. Storage is shared on clone and
/// copied on first mutation.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dims: [usize; 4],
    data: Arc<Vec<f64>>,
}

impl Tensor4 {
    pub fn new(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(invalid(format!("tensor dims must be positive, got {dims:?}")));
        }
        if data.len() != dims.iter().product::<usize>() {
            return Err(shape(format!("{} values for dims {dims:?}", data.len())));
        }
        Ok(Self { dims, data: Arc::new(data) })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        Self::new(dims, vec![0.0; dims.iter().product()]).expect("positive dims")
    }

    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut(usize) -> f64) -> Self {
        let n = dims.iter().product();
        Self::new(dims, (0..n).map(&mut f).collect()).expect("positive dims")
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn n(&self) -> usize {
        self.dims[0]
    }

    pub fn c(&self) -> usize {
        self.dims[1]
    }

    pub fn h(&self) -> usize {
        self.dims[2]
    }

    pub fn w(&self) -> usize {
        self.dims[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        Arc::make_mut(&mut self.data).as_mut_slice()
    }

    pub fn into_data(self) -> Vec<f64> {
        Arc::try_unwrap(self.data).unwrap_or_else(|d| (*d).clone())
    }

    pub fn sample_len(&self) -> usize {
        self.dims[1] * self.dims[2] * self.dims[3]
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let s = self.sample_len();
        &self.data[i * s..(i + 1) * s]
    }

    pub fn get(&self, n: usize, c: usize, h: usize, w: usize) -> f64 {
        let [_, cc, hh, ww] = self.dims;
        self.data[((n * cc + c) * hh + h) * ww + w]
    }

    pub fn set(&mut self, n: usize, c: usize, h: usize, w: usize, v: f64) {
        let [_, cc, hh, ww] = self.dims;
        self.data_mut()[((n * cc + c) * hh + h) * ww + w] = v;
    }

    pub fn dot(&self, other: &Tensor4) -> f64 {
        self.data.iter().zip(other.data.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor4 {
        Tensor4 { dims: self.dims, data: Arc::new(self.data.iter().map(|&v| f(v)).collect()) }
    }

    pub fn add(&self, other: &Tensor4) -> Result<Tensor4> {
        self.expect_dims(other.dims)?;
        Ok(Tensor4 {
            dims: self.dims,
            data: Arc::new(self.data.iter().zip(other.data.iter()).map(|(a, b)| a + b).collect()),
        })
    }

    /// Reinterprets the data under new dims with the same element count.
    pub fn reshape(self, dims: [usize; 4]) -> Result<Tensor4> {
        if self.data.len() != dims.iter().product::<usize>() || dims.contains(&0) {
            return Tensor4::new(dims, self.into_data());
        }
        Ok(Tensor4 { dims, data: self.data })
    }

    pub fn expect_dims(&self, dims: [usize; 4]) -> Result<()> {
        if self.dims != dims {
            return Err(shape(format!("expected dims {dims:?}, got {:?}", self.dims)));
        }
        Ok(())
    }

    /// Stacks samples along the batch axis.
    pub fn stack(samples: &[&[f64]], chw: [usize; 3]) -> Result<Tensor4> {
        let per = chw.iter().product::<usize>();
        let mut data = Vec::with_capacity(per * samples.len());
        for s in samples {
            if s.len() != per {
                return Err(shape(format!("sample of {} values, expected {per}", s.len())));
            }
            data.extend_from_slice(s);
        }
        Tensor4::new([samples.len(), chw[0], chw[1], chw[2]], data)
    }

    /// Concatenates along the channel axis.
    pub fn concat_channels(parts: &[&Tensor4]) -> Result<Tensor4> {
        let first = parts.first().ok_or_else(|| invalid("nothing to concatenate"))?;
        let [n, _, h, w] = first.dims;
        for p in parts {
            if p.n() != n || p.h() != h || p.w() != w {
                return Err(shape(format!("cannot concatenate {:?} with {:?}", p.dims, first.dims)));
            }
        }
        let c: usize = parts.iter().map(|p| p.c()).sum();
        let mut data = Vec::with_capacity(n * c * h * w);
        for i in 0..n {
            for p in parts {
                data.extend_from_slice(p.sample(i));
            }
        }
        Tensor4::new([n, c, h, w], data)
    }

    /// Inverse of [`Tensor4::concat_channels`].
    pub fn split_channels(&self, channels: &[usize]) -> Result<Vec<Tensor4>> {
        if channels.iter().sum::<usize>() != self.c() {
            return Err(shape("channel split does not cover the tensor"));
        }
        let [n, _, h, w] = self.dims;
        let mut out: Vec<Vec<f64>> = channels.iter().map(|c| Vec::with_capacity(n * c * h * w)).collect();
        for i in 0..n {
            let mut off = 0;
            let s = self.sample(i);
            for (k, &c) in channels.iter().enumerate() {
                out[k].extend_from_slice(&s[off * h * w..(off + c) * h * w]);
                off += c;
            }
        }
        out.into_iter()
            .zip(channels)
            .map(|(d, &c)| Tensor4::new([n, c, h, w], d))
            .collect()
    }
}
