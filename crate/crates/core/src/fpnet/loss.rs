use alloc::vec;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn check(logits: &Tensor, labels: &[usize]) -> Result<(usize, usize)> {
    let shape = logits.shape();
    if shape.len() != 2 || shape[0] != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![labels.len(), shape.last().copied().unwrap_or(0)],
            actual: shape.to_vec(),
        });
    }
    if shape[0] == 0 {
        return Err(Error::EmptyBatch);
    }
    let classes = shape[1];
    if let Some(&label) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    Ok((shape[0], classes))
}

/// `log(sum(exp(row)))`, shifted by the row maximum.
fn log_sum_exp(row: &[f32]) -> f64 {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
    let sum: f64 = row.iter().map(|&v| libm::exp(v as f64 - max)).sum();
    max + libm::log(sum)
}

/// Mean over the batch of `-log softmax(logits)[label]`, accumulated in f64.
///
/// Non-finite logits yield a non-finite loss rather than an error so callers can
/// apply their own skip policy.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    let (batch, classes) = check(logits, labels)?;
    let total: f64 = logits
        .data()
        .chunks_exact(classes)
        .zip(labels)
        .map(|(row, &y)| log_sum_exp(row) - row[y] as f64)
        .sum();
    Ok(total / batch as f64)
}

/// Gradient of [`cross_entropy`] with respect to the logits: `(softmax - onehot) / B`.
pub fn softmax_ce_grad(logits: &Tensor, labels: &[usize]) -> Result<Tensor> {
    let (batch, classes) = check(logits, labels)?;
    let mut grad = Tensor::zeros(logits.shape().to_vec());
    let scale = 1.0 / batch as f64;
    for ((row, g), &y) in logits
        .data()
        .chunks_exact(classes)
        .zip(grad.data_mut().chunks_exact_mut(classes))
        .zip(labels)
    {
        let lse = log_sum_exp(row);
        for (j, (gj, &v)) in g.iter_mut().zip(row).enumerate() {
            let p = libm::exp(v as f64 - lse);
            let t = if j == y { 1.0 } else { 0.0 };
            *gj = ((p - t) * scale) as f32;
        }
    }
    Ok(grad)
}
