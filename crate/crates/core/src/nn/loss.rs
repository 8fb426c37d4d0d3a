use super::tensor::Tensor4;
use crate::error::{invalid, shape, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxXent {
    /// Row-major `N x K` probabilities.
    pub probabilities: Vec<f64>,
    /// Mean negative log-likelihood over the batch.
    pub loss: f64,
    /// `(p - onehot) / N`, shaped like the logits.
    pub grad: Tensor4,
}

/// Stable softmax over the channel axis of `N x K x 1 x 1` logits followed by
/// mean cross-entropy.
pub fn softmax_xent(logits: &Tensor4, labels: &[usize]) -> Result<SoftmaxXent> {
    let [n, k, h, w] = logits.dims();
    if h != 1 || w != 1 {
        return Err(shape(format!("logits must be N x K x 1 x 1, got {:?}", logits.dims())));
    }
    if k < 2 {
        return Err(invalid("softmax needs at least 2 classes"));
    }
    if labels.len() != n {
        return Err(shape(format!("{} labels for a batch of {n}", labels.len())));
    }
    if let Some(bad) = labels.iter().find(|&&l| l >= k) {
        return Err(invalid(format!("label {bad} out of range for {k} classes")));
    }
    let mut probs = Vec::with_capacity(n * k);
    let mut loss = 0.0;
    for (row, &label) in logits.data().chunks_exact(k).zip(labels) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        loss += sum.ln() - (row[label] - max);
        probs.extend(exps.iter().map(|e| e / sum));
    }
    let mut grad = probs.clone();
    for (i, &label) in labels.iter().enumerate() {
        grad[i * k + label] -= 1.0;
    }
    grad.iter_mut().for_each(|g| *g /= n as f64);
    Ok(SoftmaxXent { probabilities: probs, loss: loss / n as f64, grad: Tensor4::new(logits.dims(), grad)? })
}
