use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::binio::{read_f32_vec, read_magic, read_u32, read_version, write_f32_slice, write_u32};
use crate::dtcwt;
use crate::error::{invalid, shape, Error, Result};
use crate::pso::{self, SwarmConfig};
use crate::signal::{DatasetSplit, SegmentPair};
use crate::tfa::{self, TfGrid, WindowSchedule, SCHEDULE_SECTIONS};

pub const CACHE_MAGIC: &[u8; 4] = b"GFC1";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub swarm: SwarmConfig,
    pub hop: usize,
    pub astft_size: usize,
    pub dtcwt_size: usize,
    pub dtcwt_levels: usize,
    /// Run PSO on every sample instead of once per class.
    pub per_sample_pso: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            swarm: SwarmConfig::default(),
            hop: tfa::DEFAULT_HOP,
            astft_size: 32,
            dtcwt_size: 128,
            dtcwt_levels: dtcwt::DEFAULT_LEVELS,
            per_sample_pso: false,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        self.swarm.validate()?;
        if self.hop == 0 || self.astft_size < 2 || self.dtcwt_size < 2 || self.dtcwt_levels == 0 {
            return Err(invalid("hop, grid sizes and dtcwt levels must be positive (grids >= 2)"));
        }
        Ok(())
    }
}

/// Model-ready features of one sample. Grids are min-max scaled to [0, 1],
/// row-major, frequency along rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub label: usize,
    pub astft: Vec<f32>,
    pub dtcwt: Vec<f32>,
    pub raw_h: Vec<f32>,
    pub raw_v: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub class_names: Vec<String>,
    pub astft_size: usize,
    pub dtcwt_size: usize,
    pub segment_length: usize,
    /// Window schedule the ASTFT grids were computed with (per-sample PSO
    /// stores the pooled class schedule here for reference).
    pub schedule: WindowSchedule,
    pub train: Vec<Features>,
    pub validation: Vec<Features>,
    pub test: Vec<Features>,
}

impl FeatureSet {
    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn splits(&self) -> [&[Features]; 3] {
        [&self.train, &self.validation, &self.test]
    }

    /// Sample by global index (train, then validation, then test).
    pub fn get(&self, index: usize) -> Option<&Features> {
        self.train.iter().chain(&self.validation).chain(&self.test).nth(index)
    }
}

fn to_f32(grid: TfGrid) -> Vec<f32> {
    grid.into_values().into_iter().map(|v| v as f32).collect()
}

/// ASTFT magnitude of `signal`, box-rescaled to `size x size` and min-max scaled.
pub fn astft_features(signal: &[f64], schedule: &WindowSchedule, hop: usize, size: usize) -> Result<TfGrid> {
    let grid = tfa::astft(signal, schedule, hop)?;
    Ok(tfa::rescale_grid(&grid, size, size)?.min_max_scaled())
}

/// DTCWT scalogram at full time resolution, box-averaged down to
/// `size x size` and min-max scaled.
pub fn dtcwt_features(signal: &[f64], levels: usize, size: usize) -> Result<TfGrid> {
    let coeffs = dtcwt::forward(signal, levels)?;
    let full = dtcwt::scalogram(&coeffs, size, signal.len().max(size))?;
    Ok(tfa::rescale_grid(&full, size, size)?.min_max_scaled())
}

pub fn features_for(pair: &SegmentPair, schedule: &WindowSchedule, cfg: &PreprocessConfig) -> Result<Features> {
    let v = &pair.v.samples;
    let h = &pair.h.samples;
    Ok(Features {
        label: pair.label(),
        astft: to_f32(astft_features(v, schedule, cfg.hop, cfg.astft_size)?),
        dtcwt: to_f32(dtcwt_features(h, cfg.dtcwt_levels, cfg.dtcwt_size)?),
        raw_h: h.iter().map(|&x| x as f32).collect(),
        raw_v: v.iter().map(|&x| x as f32).collect(),
    })
}

/// Repeated PSO on the first training segment (channel V) of each class.
/// Returns the per-class modes and the mode pooled over every run of every
/// class; the pooled schedule is what all samples share, so the features
/// carry no label information through the window choice.
pub fn class_schedules(data: &DatasetSplit, swarm: &SwarmConfig) -> Result<(WindowSchedule, Vec<WindowSchedule>)> {
    let mut pooled = Vec::new();
    let mut per_class = Vec::with_capacity(data.class_count());
    for label in 0..data.class_count() {
        let rep = data
            .train
            .iter()
            .find(|p| p.label() == label)
            .ok_or_else(|| invalid(format!("class {label} has no training sample")))?;
        let cfg = SwarmConfig { seed: swarm.seed.wrapping_add(1000 * label as u64), ..swarm.clone() };
        let runs = pso::repeated_runs(&rep.v.samples, &cfg)?;
        let schedules: Vec<WindowSchedule> = runs.iter().map(|r| r.best_schedule.clone()).collect();
        per_class.push(pso::mode_schedule(&schedules)?);
        pooled.extend(schedules);
    }
    Ok((pso::mode_schedule(&pooled)?, per_class))
}

pub fn preprocess(data: &DatasetSplit, cfg: &PreprocessConfig) -> Result<FeatureSet> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(invalid("dataset is empty"));
    }
    let (schedule, _) = class_schedules(data, &cfg.swarm)?;
    let mut splits: Vec<Vec<Features>> = Vec::with_capacity(3);
    let mut offset = 0u64;
    for split in data.splits() {
        let feats = split
            .par_iter()
            .enumerate()
            .map(|(i, pair)| {
                if cfg.per_sample_pso {
                    let swarm = SwarmConfig { seed: cfg.swarm.seed.wrapping_add(offset + i as u64), ..cfg.swarm.clone() };
                    let own = pso::pso_optimize(&pair.v.samples, &swarm)?.best_schedule;
                    features_for(pair, &own, cfg)
                } else {
                    features_for(pair, &schedule, cfg)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        offset += split.len() as u64;
        splits.push(feats);
    }
    let test = splits.pop().unwrap_or_default();
    let validation = splits.pop().unwrap_or_default();
    let train = splits.pop().unwrap_or_default();
    Ok(FeatureSet {
        class_names: data.class_names.clone(),
        astft_size: cfg.astft_size,
        dtcwt_size: cfg.dtcwt_size,
        segment_length: data.segment_length(),
        schedule,
        train,
        validation,
        test,
    })
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let n = read_u32(r)? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| invalid("class name is not UTF-8"))
}

/// Layout: magic "GFC1", version, class count, astft size, dtcwt size,
/// segment length, split counts x3, 16 schedule lengths, class names
/// (u32 length + UTF-8), then per sample: label u32 and the astft, dtcwt,
/// raw H and raw V arrays as f32.
pub fn write_features<W: Write>(w: &mut W, set: &FeatureSet) -> Result<()> {
    w.write_all(CACHE_MAGIC)?;
    write_u32(w, CACHE_VERSION)?;
    for v in [set.class_count(), set.astft_size, set.dtcwt_size, set.segment_length] {
        write_u32(w, v as u32)?;
    }
    for s in set.splits() {
        write_u32(w, s.len() as u32)?;
    }
    for &l in set.schedule.lengths() {
        write_u32(w, l as u32)?;
    }
    for name in &set.class_names {
        write_str(w, name)?;
    }
    for s in set.splits() {
        for f in s {
            write_u32(w, f.label as u32)?;
            write_f32_slice(w, &f.astft)?;
            write_f32_slice(w, &f.dtcwt)?;
            write_f32_slice(w, &f.raw_h)?;
            write_f32_slice(w, &f.raw_v)?;
        }
    }
    Ok(())
}

pub fn read_features<R: Read>(r: &mut R) -> Result<FeatureSet> {
    read_magic(r, CACHE_MAGIC)?;
    read_version(r, CACHE_VERSION)?;
    let classes = read_u32(r)? as usize;
    let astft_size = read_u32(r)? as usize;
    let dtcwt_size = read_u32(r)? as usize;
    let segment_length = read_u32(r)? as usize;
    let counts = [read_u32(r)? as usize, read_u32(r)? as usize, read_u32(r)? as usize];
    let lengths = (0..SCHEDULE_SECTIONS).map(|_| read_u32(r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let schedule = WindowSchedule::from_slice(&lengths)?;
    let class_names = (0..classes).map(|_| read_str(r)).collect::<Result<Vec<_>>>()?;
    let mut splits = Vec::with_capacity(3);
    for count in counts {
        let mut v = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let label = read_u32(r)? as usize;
            if label >= classes {
                return Err(shape(format!("label {label} out of range for {classes} classes")));
            }
            v.push(Features {
                label,
                astft: read_f32_vec(r, astft_size * astft_size)?,
                dtcwt: read_f32_vec(r, dtcwt_size * dtcwt_size)?,
                raw_h: read_f32_vec(r, segment_length)?,
                raw_v: read_f32_vec(r, segment_length)?,
            });
        }
        splits.push(v);
    }
    let test = splits.pop().unwrap_or_default();
    let validation = splits.pop().unwrap_or_default();
    let train = splits.pop().unwrap_or_default();
    Ok(FeatureSet { class_names, astft_size, dtcwt_size, segment_length, schedule, train, validation, test })
}

pub fn save_features(path: &Path, set: &FeatureSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_features(&mut w, set)?;
    w.flush().map_err(Error::from)
}

pub fn load_features(path: &Path) -> Result<FeatureSet> {
    read_features(&mut BufReader::new(File::open(path)?))
}

/// Grid of one cached sample as a `TfGrid` (for export).
pub fn grid_of(values: &[f32], size: usize) -> Result<TfGrid> {
    TfGrid::new(size, size, values.iter().map(|&v| v as f64).collect(), 1.0, 1.0)
}
