use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fixed::{exp2_exponent, pow2_neg_q16, SOFTMAX_FRAC_BITS};
use crate::qtensor::QuantTensor;

/// Exponent of the output-layer error: `127 * 2^-7` is just below 1.
pub const OUTPUT_ERROR_EXPONENT: i32 = -7;

/// Integer approximation of `softmax(logits) - onehot(labels)`.
///
/// Per row, each logit's distance to the row maximum is turned into a base-2
/// exponent with four fractional bits (the `47274 * 2^-15` approximation of
/// `log2 e`), the power of two is read from a Q16 table, and the normalized
/// probabilities are scaled to 127. The result has exponent -7, so values
/// reconstruct into `[-1, 1]`.
pub fn int_ce_output_grad(logits: &QuantTensor, labels: &[usize]) -> Result<QuantTensor> {
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
    let mut out = Vec::with_capacity(logits.len());
    let mut powers = vec![0u64; classes];
    for (row, &y) in logits.data().chunks_exact(classes).zip(labels) {
        let max = row.iter().copied().max().unwrap_or(0) as i64;
        let mut total = 0u64;
        for (p, &v) in powers.iter_mut().zip(row) {
            let t = exp2_exponent(v as i64 - max, logits.exponent, SOFTMAX_FRAC_BITS, true);
            *p = pow2_neg_q16(t.min(0)) as u64;
            total += *p;
        }
        for (j, &p) in powers.iter().enumerate() {
            let q = ((p * 127 + total / 2) / total) as i32;
            let e = q - if j == y { 127 } else { 0 };
            out.push(e as i8);
        }
    }
    QuantTensor::new(shape.to_vec(), out, OUTPUT_ERROR_EXPONENT)
}
