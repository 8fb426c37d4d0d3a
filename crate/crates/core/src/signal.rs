//! Acceleration signals: segmentation, normalization, synthetic gear faults and
//! the labeled H/V dataset.
//!
//! The synthetic generator stands in for test-rig recordings. Every class is a
//! gear-mesh carrier (three harmonics) plus white noise at a requested SNR, with
//! one class-specific signature added on top:
//!
//! | class          | signature                                                        |
//! |----------------|------------------------------------------------------------------|
//! | healthy        | none                                                             |
//! | broken tooth   | once-per-revolution decaying impulse and a brief mesh dropout    |
//! | missing tooth  | as broken tooth with twice the impulse amplitude, full dropout   |
//! | crack          | amplitude and phase modulation of the mesh at shaft frequency    |
//! | wear           | band-limited noise above three times the mesh frequency          |
//! | eccentric      | low-frequency component at the shaft frequency                   |
//!
//! The H and V channels of one sample share the fault event (phases, impulse
//! times, wear noise) and differ in the measurement noise realization and a
//! 90 degree offset on the mesh carrier.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::binio;
use crate::error::{invalid, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"GFD1";
pub const DATASET_VERSION: u32 = 1;

/// Desk-scale sampling rate used by the synthetic datasets.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 2048.0;
pub const DEFAULT_SHAFT_FREQ_HZ: f64 = 16.0;
pub const DEFAULT_MESH_FREQ_HZ: f64 = 192.0;

const NORMALIZE_EPS: f64 = 1e-12;

/// A raw acceleration record.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("time series must be nonempty"));
        }
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(invalid(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentSpec {
    pub length: usize,
    pub hop: usize,
}

impl SegmentSpec {
    pub fn new(length: usize, hop: usize) -> Result<Self> {
        if length < 2 {
            return Err(invalid(format!("segment length must be >= 2, got {length}")));
        }
        if hop < 1 {
            return Err(invalid("segment hop must be >= 1"));
        }
        Ok(Self { length, hop })
    }

    /// Number of segments a series of `n` samples yields.
    pub fn count(&self, n: usize) -> usize {
        if n < self.length {
            0
        } else {
            (n - self.length) / self.hop + 1
        }
    }
}

/// Splits `series` into fixed-length, possibly overlapping, segments in order.
pub fn segment(series: &TimeSeries, spec: SegmentSpec) -> Result<Vec<Vec<f64>>> {
    let spec = SegmentSpec::new(spec.length, spec.hop)?;
    let n = series.len();
    if n < spec.length {
        return Err(invalid(format!(
            "series of {n} samples is shorter than segment length {}",
            spec.length
        )));
    }
    Ok((0..spec.count(n))
        .map(|i| series.samples[i * spec.hop..i * spec.hop + spec.length].to_vec())
        .collect())
}

/// Per-segment z-score (population standard deviation). Constant input maps to zeros.
pub fn normalize(segment: &[f64]) -> Vec<f64> {
    if segment.is_empty() {
        return Vec::new();
    }
    let n = segment.len() as f64;
    let mean = segment.iter().sum::<f64>() / n;
    let var = segment.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < NORMALIZE_EPS * (1.0 + mean.abs()) {
        return vec![0.0; segment.len()];
    }
    segment.iter().map(|x| (x - mean) / std).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    H,
    V,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegment {
    pub samples: Vec<f64>,
    pub label: usize,
    pub channel: Channel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultKind {
    Healthy,
    BrokenTooth,
    Wear,
    Crack,
    MissingTooth,
    Eccentric,
}

impl FaultKind {
    pub const ALL: [FaultKind; 6] = [
        FaultKind::Healthy,
        FaultKind::BrokenTooth,
        FaultKind::Wear,
        FaultKind::Crack,
        FaultKind::MissingTooth,
        FaultKind::Eccentric,
    ];

    /// The five conditions of the planetary-gearbox case (H, G, W, C, M).
    pub const CASE_ONE: [FaultKind; 5] = [
        FaultKind::Healthy,
        FaultKind::BrokenTooth,
        FaultKind::Wear,
        FaultKind::Crack,
        FaultKind::MissingTooth,
    ];

    /// The six conditions of the drivetrain-simulator case (H, W, M1, M2, C, E).
    pub const CASE_TWO: [FaultKind; 6] = [
        FaultKind::Healthy,
        FaultKind::Wear,
        FaultKind::BrokenTooth,
        FaultKind::MissingTooth,
        FaultKind::Crack,
        FaultKind::Eccentric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FaultKind::Healthy => "healthy",
            FaultKind::BrokenTooth => "broken_tooth",
            FaultKind::Wear => "wear",
            FaultKind::Crack => "crack",
            FaultKind::MissingTooth => "missing_tooth",
            FaultKind::Eccentric => "eccentric",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| invalid(format!("unknown fault class {name:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticFaultSpec {
    pub kind: FaultKind,
    pub mesh_freq_hz: f64,
    pub shaft_freq_hz: f64,
    pub snr_db: f64,
    pub seed: u64,
}

impl SyntheticFaultSpec {
    pub fn new(kind: FaultKind, seed: u64) -> Self {
        Self {
            kind,
            mesh_freq_hz: DEFAULT_MESH_FREQ_HZ,
            shaft_freq_hz: DEFAULT_SHAFT_FREQ_HZ,
            snr_db: 20.0,
            seed,
        }
    }

    pub fn with_snr(mut self, snr_db: f64) -> Self {
        self.snr_db = snr_db;
        self
    }

    fn validate(&self, duration_samples: usize, sample_rate_hz: f64) -> Result<()> {
        if !(self.shaft_freq_hz > 0.0) {
            return Err(invalid("shaft frequency must be positive"));
        }
        if !(self.mesh_freq_hz > self.shaft_freq_hz) {
            return Err(invalid("mesh frequency must exceed shaft frequency"));
        }
        if !(sample_rate_hz > 0.0) {
            return Err(invalid("sample rate must be positive"));
        }
        if self.mesh_freq_hz >= sample_rate_hz / 2.0 {
            return Err(invalid("mesh frequency must be below Nyquist"));
        }
        if !self.snr_db.is_finite() {
            return Err(invalid("snr_db must be finite"));
        }
        let mesh_period = sample_rate_hz / self.mesh_freq_hz;
        if (duration_samples as f64) < 2.0 * mesh_period {
            return Err(invalid(format!(
                "duration of {duration_samples} samples is shorter than two mesh periods"
            )));
        }
        Ok(())
    }
}

// Fault severities, relative to a unit-amplitude mesh fundamental.
const HARMONIC_AMPLITUDES: [f64; 3] = [1.0, 0.5, 0.25];
const IMPULSE_AMPLITUDE: f64 = 6.0;
const BROKEN_DROPOUT: f64 = 0.5;
const CRACK_AM_DEPTH: f64 = 0.4;
const CRACK_PM_INDEX: f64 = 0.4;
const WEAR_NOISE_STD: f64 = 0.6;
const ECCENTRIC_AMPLITUDE: f64 = 1.0;

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub(crate) fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Synthesizes the V channel of a fault event.
pub fn synthesize(
    spec: &SyntheticFaultSpec,
    duration_samples: usize,
    sample_rate_hz: f64,
) -> Result<TimeSeries> {
    Ok(synthesize_pair(spec, duration_samples, sample_rate_hz)?.1)
}

/// Synthesizes the (H, V) channel pair of one fault event.
pub fn synthesize_pair(
    spec: &SyntheticFaultSpec,
    duration_samples: usize,
    sample_rate_hz: f64,
) -> Result<(TimeSeries, TimeSeries)> {
    spec.validate(duration_samples, sample_rate_hz)?;
    let n = duration_samples;
    let fs = sample_rate_hz;
    let mut event = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0xE7E7, 0));

    let speed = event.gen_range(0.97..1.03);
    let shaft = spec.shaft_freq_hz * speed;
    let mesh = spec.mesh_freq_hz * speed;
    let amp = event.gen_range(0.8..1.2);
    let carrier_phase = event.gen_range(0.0..2.0 * PI);
    let shaft_phase = event.gen_range(0.0..2.0 * PI);
    let first_impulse = event.gen_range(0.0..1.0 / shaft);
    let severity = event.gen_range(0.8..1.2);

    let wear = if spec.kind == FaultKind::Wear {
        let mut w = highpass_noise(&mut event, n, 3.0 * spec.mesh_freq_hz / fs);
        for v in &mut w {
            *v *= WEAR_NOISE_STD * severity * amp;
        }
        Some(w)
    } else {
        None
    };

    let clean = |carrier_offset: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                let shaft_arg = 2.0 * PI * shaft * t + shaft_phase;
                let (am, pm) = match spec.kind {
                    FaultKind::Crack => (
                        1.0 + CRACK_AM_DEPTH * severity * shaft_arg.cos(),
                        CRACK_PM_INDEX * severity * shaft_arg.sin(),
                    ),
                    _ => (1.0, 0.0),
                };
                let dropout = match spec.kind {
                    FaultKind::BrokenTooth => mesh_dropout(t, first_impulse, shaft, mesh, BROKEN_DROPOUT),
                    FaultKind::MissingTooth => mesh_dropout(t, first_impulse, shaft, mesh, 1.0),
                    _ => 1.0,
                };
                let mut x = 0.0;
                for (h, a) in HARMONIC_AMPLITUDES.iter().enumerate() {
                    let k = (h + 1) as f64;
                    x += a * (k * (2.0 * PI * mesh * t + carrier_phase + carrier_offset + pm)).cos();
                }
                x *= amp * am * dropout;
                match spec.kind {
                    FaultKind::BrokenTooth => {
                        x += impulse_train(t, first_impulse, shaft, mesh, IMPULSE_AMPLITUDE * severity * amp)
                    }
                    FaultKind::MissingTooth => {
                        x += impulse_train(t, first_impulse, shaft, mesh, 2.0 * IMPULSE_AMPLITUDE * severity * amp)
                    }
                    FaultKind::Eccentric => {
                        x += ECCENTRIC_AMPLITUDE * severity * amp * shaft_arg.cos();
                    }
                    _ => {}
                }
                if let Some(w) = &wear {
                    x += w[i];
                }
                x
            })
            .collect()
    };

    let channel = |offset: f64, tag: u64| -> Result<TimeSeries> {
        let mut x = clean(offset);
        let power = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let noise_std = (power / 10f64.powf(spec.snr_db / 10.0)).sqrt();
        let mut noise = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0x0153, tag));
        for v in &mut x {
            let g: f64 = StandardNormal.sample(&mut noise);
            *v += noise_std * g;
        }
        TimeSeries::new(x, fs)
    };

    Ok((channel(PI / 2.0, 1)?, channel(0.0, 2)?))
}

/// Time since the most recent once-per-revolution event, if any has occurred.
fn since_last_event(t: f64, first: f64, shaft: f64) -> Option<f64> {
    if t < first {
        return None;
    }
    let period = 1.0 / shaft;
    Some((t - first) % period)
}

fn impulse_train(t: f64, first: f64, shaft: f64, mesh: f64, amplitude: f64) -> f64 {
    match since_last_event(t, first, shaft) {
        Some(dt) => {
            let tau = 0.01 / shaft;
            amplitude * (-dt / tau).exp() * (2.0 * PI * 4.0 * mesh * dt).sin()
        }
        None => 0.0,
    }
}

/// Mesh gain during the tooth-mesh period following each event.
fn mesh_dropout(t: f64, first: f64, shaft: f64, mesh: f64, depth: f64) -> f64 {
    match since_last_event(t, first, shaft) {
        Some(dt) if dt < 1.0 / mesh => 1.0 - depth,
        _ => 1.0,
    }
}

/// Unit-variance white noise with all content below `cutoff` (cycles/sample) removed.
fn highpass_noise(rng: &mut ChaCha8Rng, n: usize, cutoff: f64) -> Vec<f64> {
    let mut buf: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(StandardNormal.sample(rng), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 / n as f64;
        if f < cutoff {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut out: Vec<f64> = buf.iter().map(|c| c.re / n as f64).collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        for v in &mut out {
            *v /= rms;
        }
    }
    out
}

/// One dataset sample: H and V segments of the same fault event.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPair {
    pub h: LabeledSegment,
    pub v: LabeledSegment,
}

impl SegmentPair {
    pub fn label(&self) -> usize {
        self.h.label
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<SegmentPair>,
    pub validation: Vec<SegmentPair>,
    pub test: Vec<SegmentPair>,
    pub class_names: Vec<String>,
}

impl DatasetSplit {
    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn segment_length(&self) -> usize {
        self.train
            .iter()
            .chain(&self.validation)
            .chain(&self.test)
            .next()
            .map_or(0, |p| p.h.samples.len())
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn splits(&self) -> [&[SegmentPair]; 3] {
        [&self.train, &self.validation, &self.test]
    }
}

/// Generation parameters shared by every class of a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSpec {
    pub segment_length: usize,
    pub sample_rate_hz: f64,
    pub mesh_freq_hz: f64,
    pub shaft_freq_hz: f64,
    pub snr_db: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            segment_length: 1536,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            mesh_freq_hz: DEFAULT_MESH_FREQ_HZ,
            shaft_freq_hz: DEFAULT_SHAFT_FREQ_HZ,
            snr_db: 20.0,
        }
    }
}

/// Segments per synthesized recording.
const SEGMENTS_PER_RECORDING: usize = 10;

/// Builds a stratified 6:2:2 dataset. Each class is synthesized as a series of
/// recordings that are segmented and z-scored; samples are stored at `f32`
/// precision so the on-disk form round-trips exactly.
pub fn build_dataset(
    per_class_count: usize,
    classes: &[FaultKind],
    spec: &DatasetSpec,
    seed: u64,
) -> Result<DatasetSplit> {
    if per_class_count == 0 || per_class_count % 10 != 0 {
        return Err(invalid(format!(
            "per-class count must be a positive multiple of 10, got {per_class_count}"
        )));
    }
    if classes.len() < 2 {
        return Err(invalid("at least two classes are required"));
    }
    let seg = SegmentSpec::new(spec.segment_length, spec.segment_length)?;
    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        class_names: classes.iter().map(|k| k.name().to_string()).collect(),
    };
    for (label, &kind) in classes.iter().enumerate() {
        let mut pairs = Vec::with_capacity(per_class_count);
        for rec in 0..per_class_count / SEGMENTS_PER_RECORDING {
            let fault = SyntheticFaultSpec {
                kind,
                mesh_freq_hz: spec.mesh_freq_hz,
                shaft_freq_hz: spec.shaft_freq_hz,
                snr_db: spec.snr_db,
                seed: mix_seed(seed, label as u64 + 1, rec as u64),
            };
            let (h, v) = synthesize_pair(
                &fault,
                spec.segment_length * SEGMENTS_PER_RECORDING,
                spec.sample_rate_hz,
            )?;
            for (hs, vs) in segment(&h, seg)?.into_iter().zip(segment(&v, seg)?) {
                let mut hs = normalize(&hs);
                let mut vs = normalize(&vs);
                binio::quantize_f32(&mut hs);
                binio::quantize_f32(&mut vs);
                pairs.push(SegmentPair {
                    h: LabeledSegment { samples: hs, label, channel: Channel::H },
                    v: LabeledSegment { samples: vs, label, channel: Channel::V },
                });
            }
        }
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5917, label as u64)));
        let n_train = per_class_count * 6 / 10;
        let n_val = per_class_count * 2 / 10;
        for (pos, idx) in order.into_iter().enumerate() {
            let pair = pairs[idx].clone();
            if pos < n_train {
                split.train.push(pair);
            } else if pos < n_train + n_val {
                split.validation.push(pair);
            } else {
                split.test.push(pair);
            }
        }
    }
    Ok(split)
}

/// Writes the GFD1 binary layout followed by a class-name trailer.
pub fn write_dataset<W: Write>(w: &mut W, data: &DatasetSplit) -> Result<()> {
    let len = data.segment_length();
    w.write_all(DATASET_MAGIC)?;
    binio::write_u32(w, DATASET_VERSION)?;
    binio::write_u32(w, data.class_count() as u32)?;
    binio::write_u32(w, len as u32)?;
    for part in data.splits() {
        binio::write_u32(w, part.len() as u32)?;
    }
    for part in data.splits() {
        for pair in part {
            if pair.h.samples.len() != len || pair.v.samples.len() != len {
                return Err(invalid("all segments must share one length"));
            }
            binio::write_u32(w, pair.label() as u32)?;
            binio::write_f32s(w, &pair.h.samples)?;
            binio::write_f32s(w, &pair.v.samples)?;
        }
    }
    for name in &data.class_names {
        binio::write_u32(w, name.len() as u32)?;
        w.write_all(name.as_bytes())?;
    }
    Ok(())
}

pub fn read_dataset<R: Read>(r: &mut R) -> Result<DatasetSplit> {
    binio::read_magic(r, DATASET_MAGIC)?;
    binio::read_version(r, DATASET_VERSION)?;
    let class_count = binio::read_u32(r)? as usize;
    let len = binio::read_u32(r)? as usize;
    let counts = [binio::read_u32(r)?, binio::read_u32(r)?, binio::read_u32(r)?];
    let mut parts: [Vec<SegmentPair>; 3] = Default::default();
    for (part, &count) in parts.iter_mut().zip(&counts) {
        part.reserve(count as usize);
        for _ in 0..count {
            let label = binio::read_u32(r)? as usize;
            if label >= class_count {
                return Err(invalid(format!("label {label} out of range for {class_count} classes")));
            }
            let h = binio::read_f32s(r, len)?;
            let v = binio::read_f32s(r, len)?;
            part.push(SegmentPair {
                h: LabeledSegment { samples: h, label, channel: Channel::H },
                v: LabeledSegment { samples: v, label, channel: Channel::V },
            });
        }
    }
    let mut class_names = Vec::with_capacity(class_count);
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    let mut cursor = rest.as_slice();
    for i in 0..class_count {
        match read_name(&mut cursor) {
            Some(name) => class_names.push(name),
            None => class_names.push(format!("class{i}")),
        }
    }
    let [train, validation, test] = parts;
    Ok(DatasetSplit { train, validation, test, class_names })
}

fn read_name(cursor: &mut &[u8]) -> Option<String> {
    let len = binio::read_u32(cursor).ok()? as usize;
    if cursor.len() < len {
        return None;
    }
    let (name, rest) = cursor.split_at(len);
    *cursor = rest;
    String::from_utf8(name.to_vec()).ok()
}

pub fn save_dataset(path: &Path, data: &DatasetSplit) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(&mut w, data)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<DatasetSplit> {
    read_dataset(&mut BufReader::new(File::open(path)?))
}

/// One row per sample: split, label, H samples, V samples.
pub fn export_dataset_csv(path: &Path, data: &DatasetSplit) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let len = data.segment_length();
    write!(w, "split,label")?;
    for i in 0..len {
        write!(w, ",h{i}")?;
    }
    for i in 0..len {
        write!(w, ",v{i}")?;
    }
    writeln!(w)?;
    for (name, part) in ["train", "validation", "test"].iter().zip(data.splits()) {
        for pair in part {
            write!(w, "{name},{}", pair.label())?;
            for v in pair.h.samples.iter().chain(&pair.v.samples) {
                write!(w, ",{}", *v as f32)?;
            }
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Normalized fourth moment (3 for a Gaussian).
pub fn kurtosis(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    if m2 == 0.0 {
        return 0.0;
    }
    m4 / (m2 * m2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn series(n: usize) -> TimeSeries {
        TimeSeries::new((0..n).map(|i| i as f64).collect(), 1.0).unwrap()
    }

    #[test]
    fn segment_counts() {
        let one = segment(&series(1536), SegmentSpec::new(1536, 1536).unwrap()).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].len(), 1536);
        assert_eq!(segment(&series(4096), SegmentSpec::new(2048, 2048).unwrap()).unwrap().len(), 2);
        // brute-force count of start positions
        let naive = (0..1536).step_by(16).filter(|s| s + 64 <= 1536).count();
        assert_eq!(naive, 93);
        let segs = segment(&series(1536), SegmentSpec::new(64, 16).unwrap()).unwrap();
        assert_eq!(segs.len(), naive);
        assert_eq!(segs[1][0], 16.0);
    }

    #[test]
    fn segment_rejects_short_series() {
        let err = segment(&series(10), SegmentSpec::new(11, 1).unwrap()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
        assert!(SegmentSpec::new(1, 1).is_err());
        assert!(SegmentSpec::new(4, 0).is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[1.0, 1.0, 1.0, 1.0]), vec![0.0; 4]);
        assert_eq!(normalize(&[-1.0, 1.0]), vec![-1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..1536).map(|_| rng.gen_range(-5.0..9.0)).collect();
        let z = normalize(&x);
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let std = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / z.len() as f64).sqrt();
        assert!(mean.abs() < 1e-12);
        assert!((std - 1.0).abs() < 1e-12);
    }

    #[test]
    fn time_series_invariants() {
        assert!(TimeSeries::new(vec![], 1.0).is_err());
        assert!(TimeSeries::new(vec![1.0], 0.0).is_err());
    }

    fn spectrum(x: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(x.len()).process(&mut buf);
        buf[..x.len() / 2].iter().map(|c| c.norm()).collect()
    }

    #[test]
    fn healthy_peak_at_mesh() {
        let spec = SyntheticFaultSpec::new(FaultKind::Healthy, 11).with_snr(40.0);
        let n = 2048;
        let x = synthesize(&spec, n, DEFAULT_SAMPLE_RATE_HZ).unwrap();
        let mag = spectrum(x.samples());
        let peak = (1..mag.len()).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
        let peak_hz = peak as f64 * DEFAULT_SAMPLE_RATE_HZ / n as f64;
        // speed jitter is at most 3%
        assert!((peak_hz - spec.mesh_freq_hz).abs() <= 0.031 * spec.mesh_freq_hz + 1.0, "{peak_hz}");
    }

    #[test]
    fn broken_tooth_raises_kurtosis() {
        for seed in 0..5 {
            let h = synthesize(&SyntheticFaultSpec::new(FaultKind::Healthy, seed), 1536, 2048.0).unwrap();
            let b = synthesize(&SyntheticFaultSpec::new(FaultKind::BrokenTooth, seed), 1536, 2048.0).unwrap();
            assert!(kurtosis(b.samples()) > kurtosis(h.samples()), "seed {seed}");
        }
    }

    #[test]
    fn eccentric_adds_low_frequency_energy() {
        let n = 2048;
        let band = |x: &TimeSeries| {
            let mag = spectrum(&normalize(x.samples()));
            let limit = (2.0 * DEFAULT_SHAFT_FREQ_HZ * n as f64 / DEFAULT_SAMPLE_RATE_HZ) as usize;
            mag[1..limit].iter().map(|m| m * m).sum::<f64>()
        };
        for seed in 0..5 {
            let h = synthesize(&SyntheticFaultSpec::new(FaultKind::Healthy, seed), n, 2048.0).unwrap();
            let e = synthesize(&SyntheticFaultSpec::new(FaultKind::Eccentric, seed), n, 2048.0).unwrap();
            assert!(band(&e) > band(&h));
        }
    }

    #[test]
    fn synthesize_is_pure() {
        let spec = SyntheticFaultSpec::new(FaultKind::Crack, 99);
        let a = synthesize_pair(&spec, 1000, 2048.0).unwrap();
        let b = synthesize_pair(&spec, 1000, 2048.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0.samples(), a.1.samples());
    }

    #[test]
    fn synthesize_rejects_bad_specs() {
        let mut spec = SyntheticFaultSpec::new(FaultKind::Healthy, 0);
        spec.mesh_freq_hz = 10.0;
        assert!(synthesize(&spec, 1000, 2048.0).is_err());
        let spec = SyntheticFaultSpec::new(FaultKind::Healthy, 0);
        assert!(synthesize(&spec, 15, 2048.0).is_err());
    }

    #[test]
    fn dataset_split_sizes() {
        let spec = DatasetSpec { segment_length: 64, ..DatasetSpec::default() };
        let d = build_dataset(20, &FaultKind::CASE_ONE, &spec, 4).unwrap();
        assert_eq!((d.train.len(), d.validation.len(), d.test.len()), (60, 20, 20));
        for label in 0..5 {
            assert_eq!(d.train.iter().filter(|p| p.label() == label).count(), 12);
            assert_eq!(d.test.iter().filter(|p| p.label() == label).count(), 4);
        }
        assert!(build_dataset(15, &FaultKind::CASE_ONE, &spec, 4).is_err());
    }

    #[test]
    fn dataset_round_trip_and_corruption() {
        let spec = DatasetSpec { segment_length: 32, ..DatasetSpec::default() };
        let d = build_dataset(10, &FaultKind::CASE_TWO, &spec, 1).unwrap();
        let mut bytes = Vec::new();
        write_dataset(&mut bytes, &d).unwrap();
        assert_eq!(read_dataset(&mut bytes.as_slice()).unwrap(), d);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_dataset(&mut bad.as_slice()), Err(Error::BadMagic { .. })));

        let truncated = &bytes[..bytes.len() / 2];
        assert!(matches!(read_dataset(&mut &truncated[..]), Err(Error::UnexpectedEnd)));

        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(matches!(read_dataset(&mut wrong_version.as_slice()), Err(Error::Version { .. })));
    }
}
