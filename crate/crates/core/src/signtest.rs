//! Agreement of the integer loss-difference sign with a floating-point oracle.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::prng::SeededGenerator;
use crate::qtensor::QuantTensor;
use crate::zo_int8::sign_loss_diff;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignTestConfig {
    pub trials: usize,
    pub batch: usize,
    pub classes: usize,
    pub seed: u32,
    /// Largest `|s_plus - s_minus|` drawn.
    pub max_gap: i32,
    /// Use the same logits for both tensors (every trial is then excluded).
    pub identical: bool,
}

impl SignTestConfig {
    pub fn new(trials: usize, batch: usize, classes: usize, seed: u32) -> Self {
        SignTestConfig { trials, batch, classes, seed, max_gap: 4, identical: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SignAgreement {
    pub trials: usize,
    /// Trials whose floating-point loss difference is exactly zero.
    pub excluded: usize,
    pub agreements: usize,
}

impl SignAgreement {
    pub fn counted(&self) -> usize {
        self.trials - self.excluded
    }

    /// Agreement rate over counted trials; 1.0 when nothing was counted.
    pub fn rate(&self) -> f64 {
        match self.counted() {
            0 => 1.0,
            n => self.agreements as f64 / n as f64,
        }
    }
}

/// Base exponent of generated logits: uniform on `[-6, 0]`.
const BASE_EXPONENT_RANGE: (i32, i32) = (-6, 0);

fn mean_cross_entropy(q: &QuantTensor, labels: &[usize], classes: usize) -> f64 {
    let scale = libm::exp2(q.exponent as f64);
    let mut total = 0.0;
    for (row, &y) in q.data().chunks_exact(classes).zip(labels) {
        let max = row.iter().map(|&v| v as f64 * scale).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&v| libm::exp(v as f64 * scale - max)).sum();
        total += max + libm::log(sum) - row[y] as f64 * scale;
    }
    total / labels.len() as f64
}

/// Draws random int8 logit pairs and compares the integer sign with the sign of
/// the floating-point cross-entropy difference.
pub fn run_sign_test(cfg: &SignTestConfig) -> Result<SignAgreement> {
    if cfg.trials == 0 || cfg.batch == 0 || cfg.classes < 2 {
        return Err(invalid("signtest", "need trials >= 1, batch >= 1 and classes >= 2"));
    }
    let mut gen = SeededGenerator::new(cfg.seed);
    let n = cfg.batch * cfg.classes;
    let mut out = SignAgreement { trials: cfg.trials, ..Default::default() };
    let (lo, hi) = BASE_EXPONENT_RANGE;
    for _ in 0..cfg.trials {
        let s_plus = lo + gen.next_below((hi - lo + 1) as u64) as i32;
        let gap = gen.next_below((2 * cfg.max_gap + 1) as u64) as i32 - cfg.max_gap;
        let plus = QuantTensor::new(
            alloc::vec![cfg.batch, cfg.classes],
            gen.uniform_int8_vector(n, 127)?,
            s_plus,
        )?;
        let minus = if cfg.identical {
            plus.clone()
        } else {
            QuantTensor::new(
                alloc::vec![cfg.batch, cfg.classes],
                gen.uniform_int8_vector(n, 127)?,
                s_plus + gap,
            )?
        };
        let labels: Vec<usize> =
            (0..cfg.batch).map(|_| gen.next_below(cfg.classes as u64) as usize).collect();
        let diff = mean_cross_entropy(&plus, &labels, cfg.classes)
            - mean_cross_entropy(&minus, &labels, cfg.classes);
        if diff == 0.0 {
            out.excluded += 1;
            continue;
        }
        let reference = if diff > 0.0 { 1 } else { -1 };
        if sign_loss_diff(&plus, &minus, &labels)? == reference {
            out.agreements += 1;
        }
    }
    Ok(out)
}
