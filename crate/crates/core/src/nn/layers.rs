use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::conv::{channel_sums, conv2d, conv2d_backward, deconv2d, deconv2d_backward, ConvSpec};
use super::tensor::Tensor4;
use super::{Layer, LayerRecord, Param};
use crate::error::{invalid, shape, Result};

fn cached<'a>(cache: &'a Option<Tensor4>, layer: &str) -> Result<&'a Tensor4> {
    cache
        .as_ref()
        .ok_or_else(|| invalid(format!("{layer}: backward called before forward")))
}

fn he_normal<R: Rng>(n: usize, fan_in: usize, rng: &mut R) -> Vec<f64> {
    let std = (2.0 / fan_in.max(1) as f64).sqrt();
    let dist = Normal::new(0.0, std).expect("finite std");
    (0..n).map(|_| dist.sample(rng)).collect()
}

pub(crate) fn spec_ints(spec: &ConvSpec, bias: bool) -> Vec<u32> {
    [
        spec.in_channels,
        spec.out_channels,
        spec.kernel.0,
        spec.kernel.1,
        spec.stride,
        spec.dilation.0,
        spec.dilation.1,
        spec.padding.0,
        spec.padding.1,
        bias as usize,
    ]
    .iter()
    .map(|&v| v as u32)
    .collect()
}

pub struct Conv2d {
    pub spec: ConvSpec,
    pub weight: Param,
    pub bias: Option<Param>,
    input: Option<Tensor4>,
}

impl Conv2d {
    pub fn new<R: Rng>(spec: ConvSpec, bias: bool, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        if spec.transposed {
            return Err(invalid("Conv2d needs a non-transposed spec"));
        }
        let fan_in = spec.in_channels * spec.kernel.0 * spec.kernel.1;
        Ok(Self {
            weight: Param::new(he_normal(spec.weight_len(), fan_in, rng)),
            bias: bias.then(|| Param::new(vec![0.0; spec.out_channels])),
            spec,
            input: None,
        })
    }
}

impl Layer for Conv2d {
    fn forward(&mut self, x: &Tensor4, train: bool) -> Result<Tensor4> {
        let y = conv2d(x, &self.weight.value, self.bias.as_ref().map(|b| b.value.as_slice()), &self.spec)?;
        if train {
            self.input = Some(x.clone());
        }
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let x = cached(&self.input, "conv")?;
        let (dx, dw) = conv2d_backward(x, &self.weight.value, &self.spec, grad)?;
        self.weight.accumulate(&dw);
        if let Some(b) = &mut self.bias {
            b.accumulate(&channel_sums(grad));
        }
        Ok(dx)
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.weight);
        if let Some(b) = &mut self.bias {
            f(b);
        }
    }

    fn records(&self, out: &mut Vec<LayerRecord>) {
        let mut arrays = vec![self.weight.value.clone()];
        if let Some(b) = &self.bias {
            arrays.push(b.value.clone());
        }
        out.push(LayerRecord { tag: LayerRecord::CONV, spec: spec_ints(&self.spec, self.bias.is_some()), arrays });
    }

    fn load_records(&mut self, it: &mut dyn Iterator<Item = LayerRecord>) -> Result<()> {
        let mut arrays = LayerRecord::take(it, LayerRecord::CONV, &spec_ints(&self.spec, self.bias.is_some()))?;
        if let Some(b) = &mut self.bias {
            b.load(arrays.pop().ok_or_else(|| shape("missing bias"))?)?;
        }
        self.weight.load(arrays.pop().ok_or_else(|| shape("missing weights"))?)
    }
}

pub struct ConvTranspose2d {
    pub spec: ConvSpec,
    pub weight: Param,
    pub bias: Option<Param>,
    input: Option<Tensor4>,
}

impl ConvTranspose2d {
    pub fn new<R: Rng>(spec: ConvSpec, bias: bool, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        if !spec.transposed {
            return Err(invalid("ConvTranspose2d needs a transposed spec"));
        }
        // each output sees about in * (k / s)^2 inputs
        let taps = (spec.kernel.0 * spec.kernel.1) / (spec.stride * spec.stride);
        let fan_in = spec.in_channels * taps.max(1);
        Ok(Self {
            weight: Param::new(he_normal(spec.weight_len(), fan_in, rng)),
            bias: bias.then(|| Param::new(vec![0.0; spec.out_channels])),
            spec,
            input: None,
        })
    }
}

impl Layer for ConvTranspose2d {
    fn forward(&mut self, x: &Tensor4, train: bool) -> Result<Tensor4> {
        let y = deconv2d(x, &self.weight.value, self.bias.as_ref().map(|b| b.value.as_slice()), &self.spec)?;
        if train {
            self.input = Some(x.clone());
        }
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let x = cached(&self.input, "deconv")?;
        let (dx, dw) = deconv2d_backward(x, &self.weight.value, &self.spec, grad)?;
        self.weight.accumulate(&dw);
        if let Some(b) = &mut self.bias {
            b.accumulate(&channel_sums(grad));
        }
        Ok(dx)
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.weight);
        if let Some(b) = &mut self.bias {
            f(b);
        }
    }

    fn records(&self, out: &mut Vec<LayerRecord>) {
        let mut arrays = vec![self.weight.value.clone()];
        if let Some(b) = &self.bias {
            arrays.push(b.value.clone());
        }
        out.push(LayerRecord { tag: LayerRecord::DECONV, spec: spec_ints(&self.spec, self.bias.is_some()), arrays });
    }

    fn load_records(&mut self, it: &mut dyn Iterator<Item = LayerRecord>) -> Result<()> {
        let mut arrays = LayerRecord::take(it, LayerRecord::DECONV, &spec_ints(&self.spec, self.bias.is_some()))?;
        if let Some(b) = &mut self.bias {
            b.load(arrays.pop().ok_or_else(|| shape("missing bias"))?)?;
        }
        self.weight.load(arrays.pop().ok_or_else(|| shape("missing weights"))?)
    }
}

#[derive(Default)]
pub struct Relu {
    input: Option<Tensor4>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }
}

pub fn relu(x: &Tensor4) -> Tensor4 {
    x.map(|v| v.max(0.0))
}

impl Layer for Relu {
    fn forward(&mut self, x: &Tensor4, train: bool) -> Result<Tensor4> {
        if train {
            self.input = Some(x.clone());
        }
        Ok(relu(x))
    }

    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let x = cached(&self.input, "relu")?;
        grad.expect_dims(x.dims())?;
        let data = x.data().iter().zip(grad.data()).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect();
        Tensor4::new(x.dims(), data)
    }

    fn records(&self, out: &mut Vec<LayerRecord>) {
        out.push(LayerRecord { tag: LayerRecord::RELU, spec: vec![], arrays: vec![] });
    }

    fn load_records(&mut self, it: &mut dyn Iterator<Item = LayerRecord>) -> Result<()> {
        LayerRecord::take(it, LayerRecord::RELU, &[]).map(|_| ())
    }
}

/// Max pooling over `kh x kw` windows; windows that would run past the edge
/// are dropped. Ties go to the first index.
pub struct MaxPool2d {
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    argmax: Option<(Vec<usize>, [usize; 4])>,
}

impl MaxPool2d {
    pub fn new(kernel: usize, stride: usize) -> Result<Self> {
        Self::new_hw((kernel, kernel), (stride, stride))
    }

    pub fn new_hw(kernel: (usize, usize), stride: (usize, usize)) -> Result<Self> {
        if kernel.0 == 0 || kernel.1 == 0 || stride.0 == 0 || stride.1 == 0 {
            return Err(invalid("pool kernel and stride must be >= 1"));
        }
        Ok(Self { kernel, stride, argmax: None })
    }

    fn out_dim(k: usize, s: usize, n: usize) -> Result<usize> {
        if n < k {
            return Err(shape(format!("pool kernel {k} exceeds input {n}")));
        }
        Ok((n - k) / s + 1)
    }

    fn spec(&self) -> [u32; 4] {
        [self.kernel.0 as u32, self.kernel.1 as u32, self.stride.0 as u32, self.stride.1 as u32]
    }
}

impl Layer for MaxPool2d {
    fn forward(&mut self, x: &Tensor4, train: bool) -> Result<Tensor4> {
        let [n, c, h, w] = x.dims();
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let oh = Self::out_dim(kh, sh, h)?;
        let ow = Self::out_dim(kw, sw, w)?;
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut arg = Vec::with_capacity(out.capacity());
        for (p, plane) in x.data().chunks_exact(h * w).enumerate() {
            let base = p * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_i = 0;
                    for m in 0..kh {
                        for k in 0..kw {
                            let i = (oy * sh + m) * w + ox * sw + k;
                            if plane[i] > best {
                                best = plane[i];
                                best_i = i;
                            }
                        }
                    }
                    out.push(best);
                    arg.push(base + best_i);
                }
            }
        }
        if train {
            self.argmax = Some((arg, x.dims()));
        }
        Tensor4::new([n, c, oh, ow], out)
    }

    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let (arg, dims) = self
            .argmax
            .as_ref()
            .ok_or_else(|| invalid("maxpool: backward called before forward"))?;
        if grad.len() != arg.len() {
            return Err(shape("maxpool gradient size mismatch"));
        }
        let mut dx = Tensor4::zeros(*dims);
        for (&i, &g) in arg.iter().zip(grad.data()) {
            dx.data_mut()[i] += g;
        }
        Ok(dx)
    }

    fn records(&self, out: &mut Vec<LayerRecord>) {
        out.push(LayerRecord { tag: LayerRecord::MAXPOOL, spec: self.spec().to_vec(), arrays: vec![] });
    }

    fn load_records(&mut self, it: &mut dyn Iterator<Item = LayerRecord>) -> Result<()> {
        LayerRecord::take(it, LayerRecord::MAXPOOL, &self.spec()).map(|_| ())
    }
}

/// Symmetric spatial crop; on odd differences the extra row/column is
/// removed from the high side.
pub struct CenterCrop {
    pub height: usize,
    pub width: usize,
    input_dims: Option<[usize; 4]>,
}

impl CenterCrop {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width, input_dims: None }
    }
}

pub fn center_crop(x: &Tensor4, th: usize, tw: usize) -> Result<Tensor4> {
    let [n, c, h, w] = x.dims();
    if th > h || tw > w || th == 0 || tw == 0 {
        return Err(shape(format!("cannot crop {h}x{w} to {th}x{tw}")));
    }
    let (top, left) = ((h - th) / 2, (w - tw) / 2);
    let mut out = Vec::with_capacity(n * c * th * tw);
    for plane in x.data().chunks_exact(h * w) {
        for y in top..top + th {
            out.extend_from_slice(&plane[y * w + left..y * w + left + tw]);
        }
    }
    Tensor4::new([n, c, th, tw], out)
}

impl Layer for CenterCrop {
    fn forward(&mut self, x: &Tensor4, train: bool) -> Result<Tensor4> {
        let y = center_crop(x, self.height, self.width)?;
        if train {
            self.input_dims = Some(x.dims());
        }
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let [n, c, h, w] = self.input_dims.ok_or_else(|| invalid("crop: backward called before forward"))?;
        grad.expect_dims([n, c, self.height, self.width])?;
        let (top, left) = ((h - self.height) / 2, (w - self.width) / 2);
        let mut dx = Tensor4::zeros([n, c, h, w]);
        for (plane, g) in dx.data_mut().chunks_exact_mut(h * w).zip(grad.data().chunks_exact(self.height * self.width)) {
            for y in 0..self.height {
                let dst = (top + y) * w + left;
                plane[dst..dst + self.width].copy_from_slice(&g[y * self.width..(y + 1) * self.width]);
            }
        }
        Ok(dx)
    }

    fn records(&self, out: &mut Vec<LayerRecord>) {
        out.push(LayerRecord { tag: LayerRecord::CROP, spec: vec![self.height as u32, self.width as u32], arrays: vec![] });
    }

    fn load_records(&mut self, it: &mut dyn Iterator<Item = LayerRecord>) -> Result<()> {
        LayerRecord::take(it, LayerRecord::CROP, &[self.height as u32, self.width as u32]).map(|_| ())
    }
}

/// Spatial mean per channel, output `N x C x 1 x 1`.
#[derive(Default)]
pub struct GlobalAvgPool {
    input_dims: Option<[usize; 4]>,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        Self::default()
    }
}

pub fn gap(x: &Tensor4) -> Tensor4 {
    let hw = x.h() * x.w();
    let data = x.data().chunks_exact(hw).map(|p| p.iter().sum::<f64>() / hw as f64).collect();
    Tensor4::new([x.n(), x.c(), 1, 1], data).expect("consistent dims")
}

impl Layer for GlobalAvgPool {
    fn forward(&mut self, x: &Tensor4, train: bool) -> Result<Tensor4> {
        if train {
            self.input_dims = Some(x.dims());
        }
        Ok(gap(x))
    }

    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let [n, c, h, w] = self.input_dims.ok_or_else(|| invalid("gap: backward called before forward"))?;
        grad.expect_dims([n, c, 1, 1])?;
        let hw = h * w;
        let mut data = Vec::with_capacity(n * c * hw);
        for &g in grad.data() {
            data.extend(std::iter::repeat(g / hw as f64).take(hw));
        }
        Tensor4::new([n, c, h, w], data)
    }

    fn records(&self, out: &mut Vec<LayerRecord>) {
        out.push(LayerRecord { tag: LayerRecord::GAP, spec: vec![], arrays: vec![] });
    }

    fn load_records(&mut self, it: &mut dyn Iterator<Item = LayerRecord>) -> Result<()> {
        LayerRecord::take(it, LayerRecord::GAP, &[]).map(|_| ())
    }
}

/// Layers applied in order.
#[derive(Default)]
pub struct Sequential {
    pub layers: Vec<Box<dyn Layer>>,
}

impl Sequential {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(mut self, layer: impl Layer + 'static) -> Self {
        self.layers.push(Box::new(layer));
        self
    }
}

impl Layer for Sequential {
    fn forward(&mut self, x: &Tensor4, train: bool) -> Result<Tensor4> {
        let mut y = x.clone();
        for l in &mut self.layers {
            y = l.forward(&y, train)?;
        }
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let mut g = grad.clone();
        for l in self.layers.iter_mut().rev() {
            g = l.backward(&g)?;
        }
        Ok(g)
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        for l in &mut self.layers {
            l.visit_params(f);
        }
    }

    fn records(&self, out: &mut Vec<LayerRecord>) {
        for l in &self.layers {
            l.records(out);
        }
    }

    fn load_records(&mut self, it: &mut dyn Iterator<Item = LayerRecord>) -> Result<()> {
        for l in &mut self.layers {
            l.load_records(it)?;
        }
        Ok(())
    }
}
