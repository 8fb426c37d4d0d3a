use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, shape, Error, Result};
use crate::nn::{
    BatchNorm2d, CenterCrop, Conv2d, ConvSpec, ConvTranspose2d, GlobalAvgPool, Layer, LayerRecord, MaxPool2d, Param,
    Relu, ResidualBlock, Sequential, Tensor4,
};

use super::features::Features;

/// Which inputs reach the trunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// ASTFT (channel V) and DTCWT (channel H) branches fused.
    Fusion,
    SingleAstft,
    SingleDtcwt,
    /// Raw channel-V segment as a 1 x L image row.
    RawV,
    RawH,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Fusion, Variant::SingleAstft, Variant::SingleDtcwt, Variant::RawV, Variant::RawH];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Fusion => "fusion",
            Variant::SingleAstft => "single_astft",
            Variant::SingleDtcwt => "single_dtcwt",
            Variant::RawV => "raw_v",
            Variant::RawH => "raw_h",
        }
    }

    pub fn is_raw(self) -> bool {
        matches!(self, Variant::RawV | Variant::RawH)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| invalid(format!("unknown variant '{s}' (expected one of fusion, single_astft, single_dtcwt, raw_v, raw_h)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub class_count: usize,
    pub variant: Variant,
    pub astft_size: usize,
    pub dtcwt_size: usize,
    pub fusion_size: usize,
    pub segment_length: usize,
    /// Channels out of each resampling branch.
    pub branch_channels: usize,
    /// Channels after the fusion 1x1 conv (and the raw front end).
    pub fused_channels: usize,
    /// Residual stage widths.
    pub widths: [usize; 3],
    /// Weight-init seed.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            class_count: 5,
            variant: Variant::Fusion,
            astft_size: 32,
            dtcwt_size: 128,
            fusion_size: 64,
            segment_length: 1536,
            branch_channels: 8,
            fused_channels: 16,
            widths: [8, 16, 32],
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Values per packed input sample.
    pub fn input_len(&self) -> usize {
        match self.variant {
            Variant::Fusion => self.astft_size.pow(2) + self.dtcwt_size.pow(2),
            Variant::SingleAstft => self.astft_size.pow(2),
            Variant::SingleDtcwt => self.dtcwt_size.pow(2),
            Variant::RawV | Variant::RawH => self.segment_length,
        }
    }

    /// Branch A: transposed conv K=4, S=2 then center crop.
    pub fn astft_branch_sizes(&self) -> (usize, usize) {
        let up = (self.astft_size - 1) * 2 + 4;
        (up, self.fusion_size)
    }

    /// Branch B: dilated conv K=3, r=2, S=2, p=1.
    pub fn dtcwt_branch_size(&self) -> Result<usize> {
        Ok(self.dtcwt_spec().output_size(self.dtcwt_size, self.dtcwt_size)?.0)
    }

    fn dtcwt_spec(&self) -> ConvSpec {
        ConvSpec::new(1, self.branch_channels, 3).dilation(2).stride(2).padding(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(invalid("need at least 2 classes"));
        }
        if [self.branch_channels, self.fused_channels, self.fusion_size].contains(&0) || self.widths.contains(&0) {
            return Err(invalid("channel widths and fusion size must be positive"));
        }
        if self.variant.is_raw() && self.segment_length < 8 {
            return Err(invalid("segment too short for the raw front end"));
        }
        if matches!(self.variant, Variant::Fusion | Variant::SingleAstft) {
            if self.astft_size == 0 {
                return Err(invalid("astft size must be positive"));
            }
            let (up, target) = self.astft_branch_sizes();
            if up < target {
                return Err(shape(format!(
                    "astft branch reaches {up}x{up} ({}x{} upsampled), short of fusion size {target}",
                    self.astft_size, self.astft_size
                )));
            }
        }
        if matches!(self.variant, Variant::Fusion | Variant::SingleDtcwt) {
            let got = self
                .dtcwt_branch_size()
                .map_err(|_| shape(format!("dtcwt size {} too small for the branch kernel", self.dtcwt_size)))?;
            if got != self.fusion_size {
                return Err(shape(format!(
                    "dtcwt branch maps {0}x{0} to {got}x{got}, not the fusion size {1}",
                    self.dtcwt_size, self.fusion_size
                )));
            }
        }
        Ok(())
    }
}

/// Dual-branch fusion network (or one of its ablations) behind the [`Layer`]
/// interface. Its input is the packed per-sample vector of [`pack_batch`],
/// shaped `N x 1 x 1 x input_len`; its output is `N x K x 1 x 1` logits.
pub struct FusionModel {
    pub config: ModelConfig,
    branch_a: Option<Sequential>,
    branch_b: Option<Sequential>,
    front: Sequential,
    pub trunk: Sequential,
    head: Sequential,
}

pub fn trunk<R: rand::Rng>(input: usize, widths: [usize; 3], rng: &mut R) -> Result<Sequential> {
    let [w0, w1, w2] = widths;
    Ok(Sequential::new()
        .push(Conv2d::new(ConvSpec::new(input, w0, 3).stride(2).padding(1), false, rng)?)
        .push(BatchNorm2d::new(w0))
        .push(Relu::new())
        .push(ResidualBlock::new(w0, w0, 1, 1, rng)?)
        .push(ResidualBlock::new(w0, w0, 1, 1, rng)?)
        .push(ResidualBlock::new(w0, w1, 2, 1, rng)?)
        .push(ResidualBlock::new(w1, w1, 1, 1, rng)?)
        // stage 3 trades stride 2 for dilation 2 and keeps the resolution
        .push(ResidualBlock::new(w1, w2, 1, 2, rng)?)
        .push(ResidualBlock::new(w2, w2, 1, 2, rng)?))
}

pub fn build_model(config: &ModelConfig) -> Result<FusionModel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (cb, cf) = (config.branch_channels, config.fused_channels);
    let branch_a = if matches!(config.variant, Variant::Fusion | Variant::SingleAstft) {
        let spec = ConvSpec::new(1, cb, 4).stride(2).transposed();
        Some(
            Sequential::new()
                .push(ConvTranspose2d::new(spec, false, &mut rng)?)
                .push(CenterCrop::new(config.fusion_size, config.fusion_size))
                .push(BatchNorm2d::new(cb))
                .push(Relu::new()),
        )
    } else {
        None
    };
    let branch_b = if matches!(config.variant, Variant::Fusion | Variant::SingleDtcwt) {
        Some(
            Sequential::new()
                .push(Conv2d::new(config.dtcwt_spec(), false, &mut rng)?)
                .push(BatchNorm2d::new(cb))
                .push(Relu::new()),
        )
    } else {
        None
    };
    let front = if config.variant.is_raw() {
        let spec = ConvSpec::new(1, cf, 1).kernel_hw(1, 7).padding_hw(0, 3).stride(4);
        Sequential::new()
            .push(Conv2d::new(spec, false, &mut rng)?)
            .push(BatchNorm2d::new(cf))
            .push(Relu::new())
            .push(MaxPool2d::new_hw((1, 4), (1, 4))?)
    } else {
        let inputs = cb * (branch_a.is_some() as usize + branch_b.is_some() as usize);
        Sequential::new()
            .push(Conv2d::new(ConvSpec::new(inputs, cf, 1), false, &mut rng)?)
            .push(BatchNorm2d::new(cf))
            .push(Relu::new())
            .push(MaxPool2d::new(2, 2)?)
    };
    let trunk = trunk(cf, config.widths, &mut rng)?;
    let head = Sequential::new()
        .push(GlobalAvgPool::new())
        .push(Conv2d::new(ConvSpec::new(config.widths[2], config.class_count, 1), true, &mut rng)?);
    Ok(FusionModel { config: config.clone(), branch_a, branch_b, front, trunk, head })
}

/// Packs samples into the model's input layout for `config.variant`.
pub fn pack_batch(samples: &[&Features], config: &ModelConfig) -> Result<Tensor4> {
    let len = config.input_len();
    let mut data = Vec::with_capacity(samples.len() * len);
    for f in samples {
        let start = data.len();
        let parts: [&[f32]; 2] = match config.variant {
            Variant::Fusion => [&f.astft, &f.dtcwt],
            Variant::SingleAstft => [&f.astft, &[]],
            Variant::SingleDtcwt => [&f.dtcwt, &[]],
            Variant::RawV => [&f.raw_v, &[]],
            Variant::RawH => [&f.raw_h, &[]],
        };
        for p in parts {
            data.extend(p.iter().map(|&v| v as f64));
        }
        if data.len() - start != len {
            return Err(shape(format!(
                "sample has {} values for variant {}, model expects {len}",
                data.len() - start,
                config.variant
            )));
        }
    }
    Tensor4::new([samples.len(), 1, 1, len], data)
}

impl FusionModel {
    pub fn parameter_count(&mut self) -> usize {
        self.param_count()
    }

    /// Splits the packed input into the per-branch images.
    fn unpack(&self, x: &Tensor4) -> Result<Vec<Tensor4>> {
        let c = &self.config;
        let n = x.n();
        x.expect_dims([n, 1, 1, c.input_len()])?;
        let (a, b) = (c.astft_size, c.dtcwt_size);
        Ok(match c.variant {
            Variant::Fusion => {
                let mut pa = Vec::with_capacity(n * a * a);
                let mut pb = Vec::with_capacity(n * b * b);
                for i in 0..n {
                    let s = x.sample(i);
                    pa.extend_from_slice(&s[..a * a]);
                    pb.extend_from_slice(&s[a * a..]);
                }
                vec![Tensor4::new([n, 1, a, a], pa)?, Tensor4::new([n, 1, b, b], pb)?]
            }
            Variant::SingleAstft => vec![x.clone().reshape([n, 1, a, a])?],
            Variant::SingleDtcwt => vec![x.clone().reshape([n, 1, b, b])?],
            Variant::RawV | Variant::RawH => vec![x.clone()],
        })
    }

    fn pack_grad(&self, parts: Vec<Tensor4>) -> Result<Tensor4> {
        let n = parts[0].n();
        let len = self.config.input_len();
        if parts.len() == 1 {
            return parts.into_iter().next().expect("one part").reshape([n, 1, 1, len]);
        }
        let mut data = Vec::with_capacity(n * len);
        for i in 0..n {
            for p in &parts {
                data.extend_from_slice(p.sample(i));
            }
        }
        Tensor4::new([n, 1, 1, len], data)
    }

    fn for_each_part(&mut self, f: &mut dyn FnMut(&mut dyn Layer)) {
        if let Some(a) = &mut self.branch_a {
            f(a);
        }
        if let Some(b) = &mut self.branch_b {
            f(b);
        }
        f(&mut self.front);
        f(&mut self.trunk);
        f(&mut self.head);
    }
}

impl Layer for FusionModel {
    fn forward(&mut self, x: &Tensor4, train: bool) -> Result<Tensor4> {
        let inputs = self.unpack(x)?;
        let fused = if self.config.variant.is_raw() {
            inputs.into_iter().next().expect("raw input")
        } else {
            let mut maps = Vec::with_capacity(2);
            let mut it = inputs.into_iter();
            if let Some(a) = &mut self.branch_a {
                maps.push(a.forward(&it.next().expect("astft input"), train)?);
            }
            if let Some(b) = &mut self.branch_b {
                maps.push(b.forward(&it.next().expect("dtcwt input"), train)?);
            }
            if maps.len() == 1 {
                maps.pop().expect("one map")
            } else {
                Tensor4::concat_channels(&maps.iter().collect::<Vec<_>>())?
            }
        };
        let y = self.front.forward(&fused, train)?;
        let y = self.trunk.forward(&y, train)?;
        self.head.forward(&y, train)
    }

    fn backward(&mut self, grad: &Tensor4) -> Result<Tensor4> {
        let g = self.head.backward(grad)?;
        let g = self.trunk.backward(&g)?;
        let g = self.front.backward(&g)?;
        if self.config.variant.is_raw() {
            return Ok(g);
        }
        let cb = self.config.branch_channels;
        let mut parts = Vec::with_capacity(2);
        let grads = if self.branch_a.is_some() && self.branch_b.is_some() {
            g.split_channels(&[cb, cb])?
        } else {
            vec![g]
        };
        let mut it = grads.into_iter();
        if let Some(a) = &mut self.branch_a {
            parts.push(a.backward(&it.next().expect("astft grad"))?);
        }
        if let Some(b) = &mut self.branch_b {
            parts.push(b.backward(&it.next().expect("dtcwt grad"))?);
        }
        self.pack_grad(parts)
    }

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.for_each_part(&mut |l| l.visit_params(f));
    }

    fn records(&self, out: &mut Vec<LayerRecord>) {
        for part in [self.branch_a.as_ref(), self.branch_b.as_ref()].into_iter().flatten() {
            part.records(out);
        }
        self.front.records(out);
        self.trunk.records(out);
        self.head.records(out);
    }

    fn load_records(&mut self, it: &mut dyn Iterator<Item = LayerRecord>) -> Result<()> {
        let mut result = Ok(());
        self.for_each_part(&mut |l| {
            if result.is_ok() {
                result = l.load_records(it);
            }
        });
        result
    }
}
