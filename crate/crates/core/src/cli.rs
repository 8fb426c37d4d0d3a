//! Run configuration and the command implementations behind the `gearfuse`
//! binary.
//!
//! The configuration is a flat `key = value` text document (`#` starts a
//! comment). Unknown keys are rejected, and the full effective configuration
//! is echoed as `config.txt` into the output directory of every command.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fusion::{
    self, build_model, evaluate, grid_of, load_features, load_model, preprocess, run_ablation, save_features,
    save_model, train_with, FeatureSet, ModelConfig, PreprocessConfig, TrainConfig, Variant,
};
use crate::pso::{self, SwarmConfig};
use crate::signal::{self, DatasetSpec, FaultKind};
use crate::tfa;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub classes: Vec<FaultKind>,
    pub per_class: usize,
    pub dataset: DatasetSpec,
    pub preprocess: PreprocessConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub out_dir: PathBuf,
    pub dataset_path: Option<PathBuf>,
    pub cache_path: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            classes: FaultKind::CASE_ONE.to_vec(),
            per_class: 1000,
            dataset: DatasetSpec::default(),
            preprocess: PreprocessConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig { epochs: 12, ..TrainConfig::default() },
            out_dir: PathBuf::from("out"),
            dataset_path: None,
            cache_path: None,
            model_path: None,
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| cfg_err(format!("{key}: cannot parse '{v}'")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(cfg_err(format!("{key}: expected true/false, got '{v}'"))),
    }
}

fn path_opt(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn parse_classes(v: &str) -> Result<Vec<FaultKind>> {
    match v {
        "case_one" => Ok(FaultKind::CASE_ONE.to_vec()),
        "case_two" => Ok(FaultKind::CASE_TWO.to_vec()),
        _ => v.split(',').map(|s| FaultKind::from_name(s.trim())).collect(),
    }
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let p = &mut self.preprocess;
        let s = &mut p.swarm;
        let m = &mut self.model;
        let t = &mut self.train;
        match key.trim() {
            "seed" => self.seed = num(key, v)?,
            "classes" => self.classes = parse_classes(v).map_err(|e| cfg_err(format!("classes: {e}")))?,
            "per_class" => self.per_class = num(key, v)?,
            "segment_length" => self.dataset.segment_length = num(key, v)?,
            "sample_rate_hz" => self.dataset.sample_rate_hz = num(key, v)?,
            "mesh_freq_hz" => self.dataset.mesh_freq_hz = num(key, v)?,
            "shaft_freq_hz" => self.dataset.shaft_freq_hz = num(key, v)?,
            "snr_db" => self.dataset.snr_db = num(key, v)?,
            "hop" => {
                p.hop = num(key, v)?;
                s.hop = p.hop;
            }
            "pso.swarm_size" => s.swarm_size = num(key, v)?,
            "pso.max_iterations" => s.max_iterations = num(key, v)?,
            "pso.inertia" => s.inertia = num(key, v)?,
            "pso.cognitive" => s.cognitive = num(key, v)?,
            "pso.social" => s.social = num(key, v)?,
            "pso.min_len" => s.min_len = num(key, v)?,
            "pso.max_len" => s.max_len = num(key, v)?,
            "pso.repeats" => s.repeats = num(key, v)?,
            "pso.stall_iterations" => s.stall_iterations = num(key, v)?,
            "pso.aim_rows" => s.aim_rows = num(key, v)?,
            "pso.aim_cols" => s.aim_cols = num(key, v)?,
            "pso.per_sample" => p.per_sample_pso = flag(key, v)?,
            "dtcwt.levels" => p.dtcwt_levels = num(key, v)?,
            "grid.astft" => {
                p.astft_size = num(key, v)?;
                m.astft_size = p.astft_size;
            }
            "grid.dtcwt" => {
                p.dtcwt_size = num(key, v)?;
                m.dtcwt_size = p.dtcwt_size;
            }
            "grid.fusion" => m.fusion_size = num(key, v)?,
            "model.variant" => m.variant = v.parse::<Variant>().map_err(|e| cfg_err(e.to_string()))?,
            "model.branch_channels" => m.branch_channels = num(key, v)?,
            "model.fused_channels" => m.fused_channels = num(key, v)?,
            "model.widths" => {
                let w: Vec<usize> = v.split(',').map(|x| num(key, x.trim())).collect::<Result<_>>()?;
                m.widths = w.try_into().map_err(|_| cfg_err("model.widths needs three comma-separated values"))?;
            }
            "train.batch_size" => t.batch_size = num(key, v)?,
            "train.epochs" => t.epochs = num(key, v)?,
            "train.learning_rate" => t.learning_rate = num(key, v)?,
            "train.keep_best" => t.keep_best = flag(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "dataset_path" => self.dataset_path = path_opt(v),
            "cache_path" => self.cache_path = path_opt(v),
            "model_path" => self.model_path = path_opt(v),
            other => return Err(cfg_err(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    /// Applies every assignment in `text` on top of the current values.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v).map_err(|e| match e {
                Error::Config(m) => cfg_err(format!("line {}: {m}", n + 1)),
                e => e,
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Propagates the run seed into the per-stage seeds and checks every
    /// section.
    pub fn resolved(&self) -> Result<Self> {
        let mut c = self.clone();
        c.preprocess.swarm.seed = c.seed;
        c.model.seed = c.seed;
        c.model.segment_length = c.dataset.segment_length;
        c.model.class_count = c.classes.len();
        c.train.seed = c.seed;
        c.preprocess.validate()?;
        c.train.validate()?;
        if c.classes.len() < 2 {
            return Err(cfg_err("classes: need at least two"));
        }
        Ok(c)
    }

    pub fn dataset_file(&self) -> PathBuf {
        self.dataset_path.clone().unwrap_or_else(|| self.out_dir.join("dataset.gfd"))
    }

    pub fn cache_file(&self) -> PathBuf {
        self.cache_path.clone().unwrap_or_else(|| self.out_dir.join("features.gfc"))
    }

    pub fn model_file(&self) -> PathBuf {
        self.model_path.clone().unwrap_or_else(|| self.out_dir.join("model.gfnn"))
    }

    /// Every key with its current value, in a fixed order.
    pub fn to_text(&self) -> String {
        let d = &self.dataset;
        let p = &self.preprocess;
        let s = &p.swarm;
        let m = &self.model;
        let t = &self.train;
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let classes: Vec<&str> = self.classes.iter().map(|k| k.name()).collect();
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("seed", self.seed.to_string());
        kv("classes", classes.join(","));
        kv("per_class", self.per_class.to_string());
        kv("segment_length", d.segment_length.to_string());
        kv("sample_rate_hz", d.sample_rate_hz.to_string());
        kv("mesh_freq_hz", d.mesh_freq_hz.to_string());
        kv("shaft_freq_hz", d.shaft_freq_hz.to_string());
        kv("snr_db", d.snr_db.to_string());
        kv("hop", p.hop.to_string());
        kv("pso.swarm_size", s.swarm_size.to_string());
        kv("pso.max_iterations", s.max_iterations.to_string());
        kv("pso.inertia", s.inertia.to_string());
        kv("pso.cognitive", s.cognitive.to_string());
        kv("pso.social", s.social.to_string());
        kv("pso.min_len", s.min_len.to_string());
        kv("pso.max_len", s.max_len.to_string());
        kv("pso.repeats", s.repeats.to_string());
        kv("pso.stall_iterations", s.stall_iterations.to_string());
        kv("pso.aim_rows", s.aim_rows.to_string());
        kv("pso.aim_cols", s.aim_cols.to_string());
        kv("pso.per_sample", p.per_sample_pso.to_string());
        kv("dtcwt.levels", p.dtcwt_levels.to_string());
        kv("grid.astft", p.astft_size.to_string());
        kv("grid.dtcwt", p.dtcwt_size.to_string());
        kv("grid.fusion", m.fusion_size.to_string());
        kv("model.variant", m.variant.to_string());
        kv("model.branch_channels", m.branch_channels.to_string());
        kv("model.fused_channels", m.fused_channels.to_string());
        kv("model.widths", format!("{},{},{}", m.widths[0], m.widths[1], m.widths[2]));
        kv("train.batch_size", t.batch_size.to_string());
        kv("train.epochs", t.epochs.to_string());
        kv("train.learning_rate", t.learning_rate.to_string());
        kv("train.keep_best", t.keep_best.to_string());
        kv("out_dir", self.out_dir.display().to_string());
        kv("dataset_path", path(&self.dataset_path));
        kv("cache_path", path(&self.cache_path));
        kv("model_path", path(&self.model_path));
        out
    }
}

fn prepare_out(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join("config.txt"), cfg.to_text())?;
    Ok(())
}

/// Model config matching the cached feature geometry.
fn model_config(cfg: &RunConfig, data: &FeatureSet) -> ModelConfig {
    ModelConfig {
        class_count: data.class_count(),
        astft_size: data.astft_size,
        dtcwt_size: data.dtcwt_size,
        segment_length: data.segment_length,
        ..cfg.model.clone()
    }
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<PathBuf> {
    let cfg = cfg.resolved()?;
    prepare_out(&cfg)?;
    let data = signal::build_dataset(cfg.per_class, &cfg.classes, &cfg.dataset, cfg.seed)?;
    let path = cfg.dataset_file();
    signal::save_dataset(&path, &data)?;
    Ok(path)
}

pub fn cmd_preprocess(cfg: &RunConfig) -> Result<PathBuf> {
    let cfg = cfg.resolved()?;
    let data = signal::load_dataset(&cfg.dataset_file())?;
    prepare_out(&cfg)?;
    let features = preprocess(&data, &cfg.preprocess)?;
    fs::write(cfg.out_dir.join("schedule.txt"), format!("{}\n", features.schedule))?;
    let path = cfg.cache_file();
    save_features(&path, &features)?;
    Ok(path)
}

pub fn cmd_train(cfg: &RunConfig, progress: bool) -> Result<fusion::Metrics> {
    let cfg = cfg.resolved()?;
    let data = load_features(&cfg.cache_file())?;
    prepare_out(&cfg)?;
    let mut model = build_model(&model_config(&cfg, &data))?;
    let metrics = train_with(&mut model, &data, &cfg.train, |m| {
        if progress {
            eprintln!(
                "epoch {:>3}  train_loss {:.4}  val_loss {:.4}  train_acc {:.4}  val_acc {:.4}",
                m.epoch, m.train_loss, m.val_loss, m.train_acc, m.val_acc
            );
        }
    })?;
    save_model(&cfg.model_file(), &model)?;
    let out = &cfg.out_dir;
    fusion::write_curves_csv(&out.join("curves.csv"), &metrics.curves)?;
    fusion::write_confusion_csv(&out.join("confusion.csv"), &metrics.test.confusion, &data.class_names)?;
    fs::write(
        out.join("metrics.txt"),
        format!(
            "variant = {}\ntest_accuracy = {:.6}\ntest_loss = {:.10}\nbest_epoch = {}\nparameters = {}\n",
            cfg.model.variant, metrics.test.accuracy, metrics.test.loss, metrics.best_epoch, metrics.parameter_count
        ),
    )?;
    fs::write(out.join("timing.txt"), format!("train_seconds = {:.3}\n", metrics.seconds))?;
    Ok(metrics)
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<fusion::Evaluation> {
    let cfg = cfg.resolved()?;
    let data = load_features(&cfg.cache_file())?;
    let mut model = load_model(&cfg.model_file(), &model_config(&cfg, &data))?;
    prepare_out(&cfg)?;
    let eval = evaluate(&mut model, &data.test)?;
    fusion::write_confusion_csv(&cfg.out_dir.join("eval_confusion.csv"), &eval.confusion, &data.class_names)?;
    fs::write(
        cfg.out_dir.join("eval.txt"),
        format!("test_accuracy = {:.6}\ntest_loss = {:.10}\n", eval.accuracy, eval.loss),
    )?;
    Ok(eval)
}

pub fn cmd_ablate(cfg: &RunConfig) -> Result<Vec<fusion::AblationRow>> {
    let cfg = cfg.resolved()?;
    let data = load_features(&cfg.cache_file())?;
    prepare_out(&cfg)?;
    let rows = run_ablation(&data, &model_config(&cfg, &data), &cfg.train)?;
    fusion::write_ablation_csv(&cfg.out_dir.join("ablation.csv"), &rows)?;
    Ok(rows)
}

/// Writes the cached ASTFT and DTCWT grids of one sample as PGM and CSV.
pub fn cmd_export_tf(cfg: &RunConfig, sample: usize) -> Result<Vec<PathBuf>> {
    let cfg = cfg.resolved()?;
    let data = load_features(&cfg.cache_file())?;
    let f = data
        .get(sample)
        .ok_or_else(|| Error::InvalidArgument(format!("sample {sample} out of range (0..{})", data.len())))?;
    prepare_out(&cfg)?;
    let mut written = Vec::new();
    for (name, values, size) in [("astft", &f.astft, data.astft_size), ("dtcwt", &f.dtcwt, data.dtcwt_size)] {
        let grid = grid_of(values, size)?.min_max_scaled();
        let pgm = cfg.out_dir.join(format!("{name}_{sample}.pgm"));
        let csv = cfg.out_dir.join(format!("{name}_{sample}.csv"));
        tfa::write_grid_pgm(&pgm, &grid)?;
        tfa::write_grid_csv(&csv, &grid)?;
        written.extend([pgm, csv]);
    }
    Ok(written)
}

/// One PSO run on the channel-V segment of a dataset sample; writes the
/// fitness trace and the best schedule.
pub fn cmd_pso_trace(cfg: &RunConfig, sample: usize) -> Result<pso::PsoResult> {
    let cfg = cfg.resolved()?;
    let data = signal::load_dataset(&cfg.dataset_file())?;
    let pair = data
        .train
        .iter()
        .chain(&data.validation)
        .chain(&data.test)
        .nth(sample)
        .ok_or_else(|| Error::InvalidArgument(format!("sample {sample} out of range (0..{})", data.len())))?;
    prepare_out(&cfg)?;
    let swarm: SwarmConfig = cfg.preprocess.swarm.clone();
    let result = pso::pso_optimize(&pair.v.samples, &swarm)?;
    pso::write_trace_csv(&cfg.out_dir.join("pso_trace.csv"), &result)?;
    fs::write(
        cfg.out_dir.join("pso_schedule.txt"),
        format!("schedule = {}\nbest_fitness = {:.12}\n", result.best_schedule, result.best_fitness),
    )?;
    Ok(result)
}

/// Process exit code for an error: 2 for invalid input or configuration,
/// 1 for I/O and file-format failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Shape(_) | Error::Config(_) => 2,
        Error::Io(_) | Error::BadMagic { .. } | Error::UnexpectedEnd | Error::Version { .. } => 1,
    }
}
