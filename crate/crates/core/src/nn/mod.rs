//! Small batched 2-D network engine with exact backpropagation.

mod conv;
mod gradcheck;
mod layers;
mod loss;
mod norm;
mod optim;
mod residual;
mod tensor;

use std::io::{Read, Write};

pub use conv::{channel_sums, conv2d, conv2d_backward, deconv2d, deconv2d_backward, ConvSpec};
pub use gradcheck::{grad_check, GradReport};
pub use layers::{
    center_crop, gap, relu, CenterCrop, Conv2d, ConvTranspose2d, GlobalAvgPool, MaxPool2d, Relu, Sequential,
};
pub use loss::{softmax_xent, SoftmaxXent};
pub use norm::BatchNorm2d;
pub use optim::Adam;
pub use residual::ResidualBlock;
pub use tensor::Tensor4;

use crate::binio::{read_f64s, read_magic, read_u32, read_version, write_f64s, write_u32};
use crate::error::{shape, Result};

/// A trainable array with its gradient and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl Param {
    pub fn new(value: Vec<f64>) -> Self {
        let n = value.len();
        Self { value, grad: vec![0.0; n], m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn accumulate(&mut self, g: &[f64]) {
        debug_assert_eq!(g.len(), self.grad.len());
        self.grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub(crate) fn load(&mut self, value: Vec<f64>) -> Result<()> {
        if value.len() != self.value.len() {
            return Err(shape(format!("parameter of {} values, checkpoint has {}", self.value.len(), value.len())));
        }
        *self = Param::new(value);
        Ok(())
    }
}

/// A differentiable module. `forward` with `train = true` caches what
/// `backward` needs; `backward` accumulates parameter gradients and returns
/// the input gradient.
pub trait Layer: Send {
    fn forward(&mut self, x: &Tensor4, train: bool) -> Result<Tensor4>;
    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4>;
    fn visit_params(&mut self, _f: &mut dyn FnMut(&mut Param)) {}
    /// Appends one record per leaf layer, in forward order.
    fn records(&self, out: &mut Vec<LayerRecord>);
    fn load_records(&mut self, it: &mut dyn Iterator<Item = LayerRecord>) -> Result<()>;

    fn zero_grad(&mut self) {
        self.visit_params(&mut |p| p.zero_grad());
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| n += p.len());
        n
    }
}

/// Serialized form of one leaf layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord {
    pub tag: u32,
    pub spec: Vec<u32>,
    pub arrays: Vec<Vec<f64>>,
}

impl LayerRecord {
    pub const CONV: u32 = 1;
    pub const DECONV: u32 = 2;
    pub const BATCHNORM: u32 = 3;
    pub const RELU: u32 = 4;
    pub const MAXPOOL: u32 = 5;
    pub const CROP: u32 = 6;
    pub const GAP: u32 = 7;

    /// Pops the next record, checking it describes the expected layer.
    pub(crate) fn take(it: &mut dyn Iterator<Item = LayerRecord>, tag: u32, spec: &[u32]) -> Result<Vec<Vec<f64>>> {
        let rec = it.next().ok_or_else(|| shape("checkpoint has fewer layers than the model"))?;
        if rec.tag != tag || rec.spec != spec {
            return Err(shape(format!(
                "checkpoint layer (tag {}, spec {:?}) does not match model layer (tag {tag}, spec {spec:?})",
                rec.tag, rec.spec
            )));
        }
        Ok(rec.arrays)
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"GFNN";
const CHECKPOINT_VERSION: u32 = 1;

/// Layout: magic, version, record count, then per record: tag, spec length,
/// spec u32s, array count, and per array its length followed by LE f64s.
pub fn write_checkpoint<W: Write>(w: &mut W, records: &[LayerRecord]) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    write_u32(w, CHECKPOINT_VERSION)?;
    write_u32(w, records.len() as u32)?;
    for r in records {
        write_u32(w, r.tag)?;
        write_u32(w, r.spec.len() as u32)?;
        for &s in &r.spec {
            write_u32(w, s)?;
        }
        write_u32(w, r.arrays.len() as u32)?;
        for a in &r.arrays {
            write_u32(w, a.len() as u32)?;
            write_f64s(w, a)?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Vec<LayerRecord>> {
    read_magic(r, CHECKPOINT_MAGIC)?;
    read_version(r, CHECKPOINT_VERSION)?;
    let count = read_u32(r)? as usize;
    let mut out = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let tag = read_u32(r)?;
        let n_spec = read_u32(r)? as usize;
        let spec = (0..n_spec).map(|_| read_u32(r)).collect::<Result<Vec<_>>>()?;
        let n_arrays = read_u32(r)? as usize;
        let mut arrays = Vec::with_capacity(n_arrays.min(16));
        for _ in 0..n_arrays {
            let len = read_u32(r)? as usize;
            arrays.push(read_f64s(r, len)?);
        }
        out.push(LayerRecord { tag, spec, arrays });
    }
    Ok(out)
}

/// Loads a checkpoint into an already-built model of the same architecture.
pub fn load_into(model: &mut dyn Layer, records: Vec<LayerRecord>) -> Result<()> {
    let mut it = records.into_iter();
    model.load_records(&mut it)?;
    if it.next().is_some() {
        return Err(shape("checkpoint has more layers than the model"));
    }
    Ok(())
}
