//! Dual-branch feature-fusion classifier: preprocessing into ASTFT / DTCWT
//! grids, the model and its ablations, training and evaluation.

mod features;
mod model;
mod train;

pub use features::{
    astft_features, class_schedules, dtcwt_features, features_for, grid_of, load_features, preprocess, read_features,
    save_features, write_features, FeatureSet, Features, PreprocessConfig, CACHE_MAGIC, CACHE_VERSION,
};
pub use model::{build_model, pack_batch, trunk, FusionModel, ModelConfig, Variant};
pub use train::{
    ablation_csv, confusion_csv, curves_csv, evaluate, run_ablation, train, train_with, write_ablation_csv,
    write_confusion_csv, write_curves_csv, AblationRow, EpochMetrics, Evaluation, Metrics, TrainConfig,
};

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::nn::{load_into, read_checkpoint, write_checkpoint, Layer};

pub fn save_model(path: &Path, model: &FusionModel) -> Result<()> {
    let mut records = Vec::new();
    model.records(&mut records);
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, &records)?;
    w.flush()?;
    Ok(())
}

/// Rebuilds the architecture from `config` and loads the checkpoint weights.
pub fn load_model(path: &Path, config: &ModelConfig) -> Result<FusionModel> {
    let mut model = build_model(config)?;
    let records = read_checkpoint(&mut BufReader::new(File::open(path)?))?;
    load_into(&mut model, records)?;
    Ok(model)
}
