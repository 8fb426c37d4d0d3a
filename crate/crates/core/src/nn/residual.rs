use rand::Rng;

use super::conv::ConvSpec;
use super::layers::{Conv2d, Relu, Sequential};
use super::norm::BatchNorm2d;
use super::tensor::Tensor4;
use super::{Layer, LayerRecord, Param};
use crate::error::Result;

/// `relu(F(x) + shortcut(x))` with `F = conv-bn-relu-conv-bn` (3x3 kernels).
/// The shortcut is the identity when shapes agree, otherwise a 1x1 strided
/// conv followed by batch norm.
pub struct ResidualBlock {
    pub body: Sequential,
    pub shortcut: Option<Sequential>,
    out: Relu,
}

impl ResidualBlock {
    pub fn new<R: Rng>(in_ch: usize, out_ch: usize, stride: usize, dilation: usize, rng: &mut R) -> Result<Self> {
        let c1 = ConvSpec::new(in_ch, out_ch, 3).stride(stride).dilation(dilation).padding(dilation);
        let c2 = ConvSpec::new(out_ch, out_ch, 3).dilation(dilation).padding(dilation);
        let body = Sequential::new()
            .push(Conv2d::new(c1, false, rng)?)
            .push(BatchNorm2d::new(out_ch))
            .push(Relu::new())
            .push(Conv2d::new(c2, false, rng)?)
            .push(BatchNorm2d::new(out_ch));
        let shortcut = if in_ch != out_ch || stride != 1 {
            let s = ConvSpec::new(in_ch, out_ch, 1).stride(stride);
            Some(Sequential::new().push(Conv2d::new(s, false, rng)?).push(BatchNorm2d::new(out_ch)))
        } else {
            None
        };
        Ok(Self { body, shortcut, out: Relu::new() })
    }

    /// Sets gamma of the body's last batch norm, e.g. to zero so the block
    /// starts as (relu of) the identity.
    pub fn set_final_gamma(&mut self, value: f64) {
        let mut seen = 0;
        let total = self.body.layers.len();
        for (i, l) in self.body.layers.iter_mut().enumerate() {
            if i == total - 1 {
                l.visit_params(&mut |p| {
                    if seen == 0 {
                        p.value.fill(value);
                    }
                    seen += 1;
                });
            }
        }
    }
}

impl Layer for ResidualBlock {
    fn forward(&mut self, x: &Tensor4, train: bool) -> Result<Tensor4> {
        let f = self.body.forward(x, train)?;
        let s = match &mut self.shortcut {
            Some(sc) => sc.forward(x, train)?,
            None => x.clone(),
        };
        self.out.forward(&f.add(&s)?, train)
    }

    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let g = self.out.backward(grad)?;
        let dx_body = self.body.backward(&g)?;
        let dx_short = match &mut self.shortcut {
            Some(sc) => sc.backward(&g)?,
            None => g,
        };
        dx_body.add(&dx_short)
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.body.visit_params(f);
        if let Some(sc) = &mut self.shortcut {
            sc.visit_params(f);
        }
    }

    fn records(&self, out: &mut Vec<LayerRecord>) {
        self.body.records(out);
        if let Some(sc) = &self.shortcut {
            sc.records(out);
        }
        self.out.records(out);
    }

    fn load_records(&mut self, it: &mut dyn Iterator<Item = LayerRecord>) -> Result<()> {
        self.body.load_records(it)?;
        if let Some(sc) = &mut self.shortcut {
            sc.load_records(it)?;
        }
        self.out.load_records(it)
    }
}
