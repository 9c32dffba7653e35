//! Integer-only hybrid training step and the loss-difference sign estimator.
//!
//! The zeroth-order side perturbs int8 weights with a sparse uniform vector
//! `z = m * u` replayed from the step seed, compares the two cross-entropy
//! losses using integer arithmetic only, and moves the weights one rounded step
//! against `sign * z`. The backprop side is [`QuantNetwork::backward_partial`].

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::fixed::{exp2_exponent, floor_log2, MAX_EXPONENT_GAP};
use crate::phases::{timed, NoTimer, Phase, PhaseTimer};
use crate::prng::{SeededGenerator, ZeroProb};
use crate::qfloat::{float_loss_sign, FloatOps};
use crate::qnet::{BackwardStats, QuantNetwork};
use crate::qtensor::{clamp_int8, max_abs, pseudo_stochastic_round, shift_to_bits, QuantTensor};

/// How the sign of `loss(plus) - loss(minus)` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignMode {
    /// Power-of-two integer estimator.
    #[default]
    Integer,
    /// Floating-point cross-entropy of the dequantized logits.
    FloatReference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZoInt8Config {
    pub r_max: u8,
    pub p_zero: ZeroProb,
    pub b_zo: u32,
    pub b_bp: u32,
    pub partition: usize,
    pub sign_mode: SignMode,
}

impl ZoInt8Config {
    pub fn new(partition: usize) -> Self {
        ZoInt8Config {
            r_max: 15,
            p_zero: ZeroProb::from_ratio(33, 100).expect("valid ratio"),
            b_zo: 1,
            b_bp: 5,
            partition,
            sign_mode: SignMode::Integer,
        }
    }

    pub fn validate(&self, depth: usize) -> Result<()> {
        if !(1..=127).contains(&self.r_max) {
            return Err(invalid("r_max", alloc::format!("{} is outside 1..=127", self.r_max)));
        }
        if !(1..=7).contains(&self.b_zo) {
            return Err(invalid("b_zo", alloc::format!("{} is outside 1..=7", self.b_zo)));
        }
        if !(1..=7).contains(&self.b_bp) {
            return Err(invalid("b_bp", alloc::format!("{} is outside 1..=7", self.b_bp)));
        }
        if self.partition > depth {
            return Err(Error::InvalidPartition { partition: self.partition, layers: depth });
        }
        Ok(())
    }
}

/// Replays `z` for layers below `partition`, calling `f(layer, theta, z)`.
fn for_each_zo_weight(
    net: &mut QuantNetwork,
    partition: usize,
    gen: &mut SeededGenerator,
    r_max: u8,
    p_zero: ZeroProb,
    mut f: impl FnMut(&mut i8, i8),
) -> Result<()> {
    for l in 0..partition.min(net.depth()) {
        let Some(w) = net.weights_mut(l) else { continue };
        let data = w.data_mut();
        gen.sparse_int8_for_each(data.len(), r_max, p_zero, |i, z| f(&mut data[i], z))?;
    }
    Ok(())
}

/// `theta <- clamp(theta + k z, -127, 127)` for every trainable layer below `partition`.
pub fn perturb_parameters_int8(
    net: &mut QuantNetwork,
    partition: usize,
    seed: u32,
    k: i32,
    r_max: u8,
    p_zero: ZeroProb,
) -> Result<()> {
    let mut gen = SeededGenerator::new(seed);
    for_each_zo_weight(net, partition, &mut gen, r_max, p_zero, |theta, z| {
        *theta = clamp_int8(*theta as i32 + k * z as i32);
    })
}

/// Applies `theta <- clamp(theta - round_b(g z))` layer by layer.
///
/// Each layer's `g z` is regenerated twice: once to find its largest magnitude,
/// which fixes the shift down to `b_zo` bits, and once to apply the update.
pub fn zo_update_int8(
    net: &mut QuantNetwork,
    partition: usize,
    seed: u32,
    grad: i8,
    r_max: u8,
    p_zero: ZeroProb,
    b_zo: u32,
) -> Result<()> {
    if grad == 0 {
        return Ok(());
    }
    let g = grad.signum() as i32;
    let cap = (1i32 << b_zo) - 1;
    let mut gen = SeededGenerator::new(seed);
    for l in 0..partition.min(net.depth()) {
        let Some(w) = net.weights_mut(l) else { continue };
        let n = w.len();
        let mut probe = gen.clone();
        let mut largest = 0i32;
        probe.sparse_int8_for_each(n, r_max, p_zero, |_, z| largest = largest.max((g * z as i32).abs()))?;
        let shift = shift_to_bits(largest as u64, b_zo);
        let data = w.data_mut();
        gen.sparse_int8_for_each(n, r_max, p_zero, |i, z| {
            let update = pseudo_stochastic_round(g * z as i32, shift).clamp(-cap, cap);
            if update != 0 {
                data[i] = clamp_int8(data[i] as i32 - update);
            }
        })?;
    }
    Ok(())
}

/// Intermediate values of the sign estimator for one sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignScratch {
    /// `47274 * (alpha_j - alpha_label) * 2^(s - 15)`, floored.
    pub alpha_hat: Vec<i64>,
    pub beta_hat: Vec<i64>,
    pub p_max: i64,
    /// Offset `p_max - 10`.
    pub p: i64,
    /// `max(hat - p, 0)`, each in `[0, 10]`.
    pub alpha_tilde: Vec<u32>,
    pub beta_tilde: Vec<u32>,
    pub alpha_sum: u64,
    pub beta_sum: u64,
}

/// Clipped exponents and power sums for one sample of both logit tensors.
///
/// Both rows are rescaled to the common exponent `s = min(s_alpha, s_beta)`;
/// exponent gaps beyond 16 are rejected.
pub fn sample_powers(
    alpha: &[i8],
    s_alpha: i32,
    beta: &[i8],
    s_beta: i32,
    label: usize,
) -> Result<SignScratch> {
    let s = s_alpha.min(s_beta);
    let gap = (s_alpha - s_beta).abs();
    if gap > MAX_EXPONENT_GAP {
        return Err(Error::ExponentMismatch { delta: s_alpha - s_beta });
    }
    let hats = |row: &[i8], shift: i32| -> Vec<i64> {
        let y = (row[label] as i64) << shift;
        row.iter().map(|&v| exp2_exponent(((v as i64) << shift) - y, s, 0, false)).collect()
    };
    let alpha_hat = hats(alpha, s_alpha - s);
    let beta_hat = hats(beta, s_beta - s);
    let p_max = alpha_hat.iter().chain(&beta_hat).copied().max().unwrap_or(0);
    let p = p_max - 10;
    let tilde = |hat: &[i64]| -> Vec<u32> { hat.iter().map(|&h| (h - p).max(0) as u32).collect() };
    let alpha_tilde = tilde(&alpha_hat);
    let beta_tilde = tilde(&beta_hat);
    let sum = |t: &[u32]| -> u64 { t.iter().map(|&x| 1u64 << x).sum() };
    Ok(SignScratch {
        alpha_sum: sum(&alpha_tilde),
        beta_sum: sum(&beta_tilde),
        alpha_hat,
        beta_hat,
        p_max,
        p,
        alpha_tilde,
        beta_tilde,
    })
}

/// Sign of `CE(plus) - CE(minus)` using integer arithmetic only.
///
/// A single sample compares the two power sums directly. Larger batches compare
/// `sum_b floor(log2(S_plus_b))` with `sum_b floor(log2(S_minus_b))`. Ties give 0.
pub fn sign_loss_diff(plus: &QuantTensor, minus: &QuantTensor, labels: &[usize]) -> Result<i8> {
    let shape = plus.shape();
    if shape != minus.shape() {
        return Err(Error::ShapeMismatch { expected: shape.to_vec(), actual: minus.shape().to_vec() });
    }
    if shape.len() != 2 || shape[0] != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: alloc::vec![labels.len(), shape.last().copied().unwrap_or(0)],
            actual: shape.to_vec(),
        });
    }
    let (batch, classes) = (shape[0], shape[1]);
    if batch == 0 {
        return Err(Error::EmptyBatch);
    }
    if let Some(&label) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    let rows = plus.data().chunks_exact(classes).zip(minus.data().chunks_exact(classes));
    let diff: i64 = if batch == 1 {
        let s = sample_powers(plus.data(), plus.exponent, minus.data(), minus.exponent, labels[0])?;
        match s.alpha_sum.cmp(&s.beta_sum) {
            core::cmp::Ordering::Greater => 1,
            core::cmp::Ordering::Less => -1,
            core::cmp::Ordering::Equal => 0,
        }
    } else {
        let mut total = 0i64;
        for ((a, b), &y) in rows.zip(labels) {
            let s = sample_powers(a, plus.exponent, b, minus.exponent, y)?;
            total += floor_log2(s.alpha_sum) as i64 - floor_log2(s.beta_sum) as i64;
        }
        total
    };
    Ok(diff.signum() as i8)
}

/// Outcome of one integer training step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Int8StepMetrics {
    /// Ternary zeroth-order gradient.
    pub sign: i8,
    pub forward_passes: u32,
    /// Floating-point operations executed by the step; zero in integer mode.
    pub float_ops: u64,
    pub backward: BackwardStats,
    /// Logits of the `theta - z` pass, for loss monitoring outside the step.
    pub logits_minus: QuantTensor,
}

pub fn train_step_int8(
    net: &mut QuantNetwork,
    input: &QuantTensor,
    labels: &[usize],
    cfg: &ZoInt8Config,
    seed: u32,
) -> Result<Int8StepMetrics> {
    train_step_int8_timed(net, input, labels, cfg, seed, &mut NoTimer)
}

pub fn train_step_int8_timed(
    net: &mut QuantNetwork,
    input: &QuantTensor,
    labels: &[usize],
    cfg: &ZoInt8Config,
    seed: u32,
    timer: &mut dyn PhaseTimer,
) -> Result<Int8StepMetrics> {
    cfg.validate(net.depth())?;
    let c = cfg.partition;
    let (r, pz) = (cfg.r_max, cfg.p_zero);
    let mut ops = FloatOps::default();

    timed(timer, Phase::ZoPerturb, || perturb_parameters_int8(net, c, seed, 1, r, pz))?;
    let plus = timed(timer, Phase::Forward, || net.forward(input))?;
    timed(timer, Phase::ZoPerturb, || perturb_parameters_int8(net, c, seed, -2, r, pz))?;
    let cache = timed(timer, Phase::Forward, || net.forward_cached(input, c))?;
    let sign = timed(timer, Phase::Loss, || match cfg.sign_mode {
        SignMode::Integer => sign_loss_diff(&plus, cache.logits(), labels),
        SignMode::FloatReference => float_loss_sign(&plus, cache.logits(), labels, &mut ops),
    })?;
    timed(timer, Phase::ZoPerturb, || perturb_parameters_int8(net, c, seed, 1, r, pz))?;
    timed(timer, Phase::ZoUpdate, || zo_update_int8(net, c, seed, sign, r, pz, cfg.b_zo))?;
    let backward =
        timed(timer, Phase::BpBackward, || net.backward_partial(&cache, labels, cfg.b_bp))?;
    Ok(Int8StepMetrics {
        sign,
        forward_passes: 2,
        float_ops: ops.0,
        backward,
        logits_minus: cache.logits().clone(),
    })
}

/// Largest `|theta|` over layers below `partition`; restore is exact while this
/// stays at or below `127 - 2 r_max`.
pub fn max_zo_weight(net: &QuantNetwork, partition: usize) -> u64 {
    (0..partition.min(net.depth()))
        .filter_map(|l| net.weights(l))
        .map(|w| max_abs(w.data()))
        .max()
        .unwrap_or(0)
}
