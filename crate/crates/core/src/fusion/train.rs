use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, shape, Result};
use crate::nn::{load_into, softmax_xent, Adam, Layer, LayerRecord};

use super::features::{FeatureSet, Features};
use super::model::{build_model, pack_batch, FusionModel, ModelConfig, Variant};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Restore the weights of the epoch with the best validation accuracy
    /// (ties go to the lower validation loss, then the earlier epoch).
    pub keep_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_size: 32, epochs: 25, learning_rate: 1e-4, seed: 0, keep_best: true }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(invalid("batch size and epochs must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<usize>,
}

impl Evaluation {
    pub fn from_predictions(labels: &[usize], predictions: &[usize], classes: usize, loss: f64) -> Self {
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (&t, &p) in labels.iter().zip(predictions) {
            confusion[t][p] += 1;
        }
        let correct: usize = (0..classes).map(|k| confusion[k][k]).sum();
        let accuracy = if labels.is_empty() { 0.0 } else { correct as f64 / labels.len() as f64 };
        Self { loss, accuracy, confusion, predictions: predictions.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub curves: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub test: Evaluation,
    pub parameter_count: usize,
    /// Wall-clock time of training plus evaluation.
    pub seconds: f64,
}

const EVAL_BATCH: usize = 64;

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Inference-mode pass over `samples`; model parameters are not touched.
pub fn evaluate(model: &mut FusionModel, samples: &[Features]) -> Result<Evaluation> {
    let k = model.config.class_count;
    let mut predictions = Vec::with_capacity(samples.len());
    let mut loss_sum = 0.0;
    for chunk in samples.chunks(EVAL_BATCH) {
        let refs: Vec<&Features> = chunk.iter().collect();
        let x = pack_batch(&refs, &model.config)?;
        let logits = model.forward(&x, false)?;
        let labels: Vec<usize> = chunk.iter().map(|f| f.label).collect();
        let out = softmax_xent(&logits, &labels)?;
        loss_sum += out.loss * chunk.len() as f64;
        predictions.extend(logits.data().chunks_exact(k).map(argmax));
    }
    let labels: Vec<usize> = samples.iter().map(|f| f.label).collect();
    let loss = if samples.is_empty() { 0.0 } else { loss_sum / samples.len() as f64 };
    Ok(Evaluation::from_predictions(&labels, &predictions, k, loss))
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Mini-batch Adam over the shuffled training split with a validation pass
/// after every epoch, then a test evaluation.
pub fn train(model: &mut FusionModel, data: &FeatureSet, cfg: &TrainConfig) -> Result<Metrics> {
    train_with(model, data, cfg, |_| {})
}

/// [`train`] with a per-epoch callback (progress reporting).
pub fn train_with(
    model: &mut FusionModel,
    data: &FeatureSet,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Metrics> {
    cfg.validate()?;
    if model.config.class_count != data.class_count() {
        return Err(shape(format!(
            "model has {} classes, data has {}",
            model.config.class_count,
            data.class_count()
        )));
    }
    if data.train.is_empty() || data.validation.is_empty() || data.test.is_empty() {
        return Err(invalid("every split must be nonempty"));
    }
    let start = Instant::now();
    let adam = Adam::new(cfg.learning_rate);
    let k = model.config.class_count;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut curves = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, f64, usize, Vec<LayerRecord>)> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut epoch_rng(cfg.seed, epoch));
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let refs: Vec<&Features> = batch.iter().map(|&i| &data.train[i]).collect();
            let labels: Vec<usize> = refs.iter().map(|f| f.label).collect();
            let x = pack_batch(&refs, &model.config)?;
            let logits = model.forward(&x, true)?;
            let out = softmax_xent(&logits, &labels)?;
            loss_sum += out.loss * batch.len() as f64;
            correct += logits.data().chunks_exact(k).zip(&labels).filter(|(row, &l)| argmax(row) == l).count();
            model.zero_grad();
            model.backward(&out.grad)?;
            adam.step_layer(model);
        }
        let val = evaluate(model, &data.validation)?;
        let m = EpochMetrics {
            epoch,
            train_loss: loss_sum / data.train.len() as f64,
            val_loss: val.loss,
            train_acc: correct as f64 / data.train.len() as f64,
            val_acc: val.accuracy,
        };
        on_epoch(&m);
        curves.push(m);
        if cfg.keep_best {
            let better = match &best {
                None => true,
                Some((acc, loss, _, _)) => val.accuracy > *acc || (val.accuracy == *acc && val.loss < *loss),
            };
            if better {
                let mut rec = Vec::new();
                model.records(&mut rec);
                best = Some((val.accuracy, val.loss, epoch, rec));
            }
        }
    }
    let best_epoch = match best {
        Some((_, _, epoch, rec)) => {
            load_into(model, rec)?;
            epoch
        }
        None => cfg.epochs,
    };
    let test = evaluate(model, &data.test)?;
    Ok(Metrics {
        curves,
        best_epoch,
        test,
        parameter_count: model.parameter_count(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub accuracy: f64,
    pub seconds: f64,
}

/// Trains every variant from the same weight seed and training seed.
pub fn run_ablation(data: &FeatureSet, base: &ModelConfig, cfg: &TrainConfig) -> Result<Vec<AblationRow>> {
    Variant::ALL
        .iter()
        .map(|&variant| {
            let mut model = build_model(&ModelConfig { variant, ..base.clone() })?;
            let m = train(&mut model, data, cfg)?;
            Ok(AblationRow { variant, accuracy: m.test.accuracy, seconds: m.seconds })
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn curves_csv(curves: &[EpochMetrics]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,train_acc,val_acc\n");
    for m in curves {
        s.push_str(&format!("{},{:.10},{:.10},{:.6},{:.6}\n", m.epoch, m.train_loss, m.val_loss, m.train_acc, m.val_acc));
    }
    s
}

pub fn confusion_csv(confusion: &[Vec<usize>], class_names: &[String]) -> String {
    let mut s = String::from("true\\predicted");
    for n in class_names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (row, name) in confusion.iter().zip(class_names) {
        s.push_str(name);
        for c in row {
            s.push_str(&format!(",{c}"));
        }
        s.push('\n');
    }
    s
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("variant,accuracy,seconds\n");
    for r in rows {
        s.push_str(&format!("{},{:.6},{:.3}\n", r.variant, r.accuracy, r.seconds));
    }
    s
}

pub fn write_curves_csv(path: &Path, curves: &[EpochMetrics]) -> Result<()> {
    write_text(path, &curves_csv(curves))
}

pub fn write_confusion_csv(path: &Path, confusion: &[Vec<usize>], class_names: &[String]) -> Result<()> {
    write_text(path, &confusion_csv(confusion, class_names))
}

pub fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<()> {
    write_text(path, &ablation_csv(rows))
}
