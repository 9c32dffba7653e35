//! FP32 hybrid training step.
//!
//! Layers `[0, C)` are perturbed along a Gaussian direction `z` that is never
//! stored: every phase reseeds a generator with the step seed and walks the
//! trainable layers in index order, so the same `z` is replayed each time.
//! Layers `[C, L)` are trained by backpropagation from the activations cached
//! during one of the loss passes.

use crate::error::{invalid, Error, Result};
use crate::fpnet::{cross_entropy, BpOptimizer, Network};
use crate::phases::{timed, NoTimer, Phase, PhaseTimer};
use crate::prng::SeededGenerator;
use crate::tensor::Tensor;

/// Parameter point whose activations feed the backprop update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BpActivations {
    /// Cache from the `theta - eps z` pass (two forward passes per step).
    #[default]
    Negative,
    /// Cache from the `theta + eps z` pass (two forward passes per step).
    Positive,
    /// Third forward pass at the restored `theta`; implies the unmerged update.
    Unperturbed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoConfig {
    pub eps: f32,
    pub lr: f32,
    /// Partition point `C`: layers `[0, C)` use the zeroth-order update.
    pub partition: usize,
    pub grad_clip: Option<f32>,
    /// Fold the restoring `+eps z` and the update into one pass.
    pub merged: bool,
    pub bp_activations: BpActivations,
}

impl ZoConfig {
    pub const DEFAULT_EPS: f32 = 1e-3;
    pub const DEFAULT_LR: f32 = 1e-2;
    pub const DEFAULT_GRAD_CLIP: f32 = 10.0;

    pub fn new(partition: usize) -> Self {
        ZoConfig {
            eps: Self::DEFAULT_EPS,
            lr: Self::DEFAULT_LR,
            partition,
            grad_clip: Some(Self::DEFAULT_GRAD_CLIP),
            merged: true,
            bp_activations: BpActivations::Negative,
        }
    }

    pub fn validate(&self, depth: usize) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(invalid("eps", alloc::format!("{} must be positive", self.eps)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid("lr", alloc::format!("{} must be positive", self.lr)));
        }
        if let Some(clip) = self.grad_clip {
            if !(clip > 0.0) {
                return Err(invalid("grad_clip", alloc::format!("{clip} must be positive")));
            }
        }
        if self.partition > depth {
            return Err(Error::InvalidPartition { partition: self.partition, layers: depth });
        }
        Ok(())
    }
}

/// Outcome of one training step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepMetrics {
    pub loss_plus: f64,
    pub loss_minus: f64,
    /// Projected gradient after clipping (zero on skipped steps).
    pub grad: f64,
    /// Loss at the point where the backprop activations were taken.
    pub bp_loss: f64,
    pub forward_passes: u32,
    /// The step was abandoned because a perturbed loss was not finite.
    pub skipped: bool,
}

impl StepMetrics {
    /// Mean of the two perturbed losses, a cheap estimate of the batch loss.
    pub fn loss(&self) -> f64 {
        0.5 * (self.loss_plus + self.loss_minus)
    }
}

/// Replays `z` from `seed` and calls `f(theta_i, z_i)` over layers `[0, partition)`.
fn for_each_zo_param(
    net: &mut Network,
    partition: usize,
    seed: u32,
    mut f: impl FnMut(&mut f32, f32),
) {
    let mut gen = SeededGenerator::new(seed);
    for l in 0..partition.min(net.depth()) {
        let Some(p) = net.params_mut(l) else { continue };
        let wlen = p.weight.len();
        let (w, b) = (p.weight.data_mut(), p.bias.data_mut());
        gen.gaussian_for_each(wlen + b.len(), |i, z| {
            if i < wlen {
                f(&mut w[i], z)
            } else {
                f(&mut b[i - wlen], z)
            }
        });
    }
}

/// `theta_l <- theta_l + k * eps * z_l` for every trainable layer below `partition`.
pub fn perturb_parameters(net: &mut Network, partition: usize, seed: u32, k: f32, eps: f32) {
    let scale = k * eps;
    if scale == 0.0 {
        return;
    }
    for_each_zo_param(net, partition, seed, |theta, z| *theta += scale * z);
}

/// Projected gradient `(l_plus - l_minus) / (2 eps)`, clamped to `[-clip, clip]`.
pub fn zo_gradient(loss_plus: f64, loss_minus: f64, eps: f32, grad_clip: Option<f32>) -> Result<f64> {
    if !loss_plus.is_finite() || !loss_minus.is_finite() {
        return Err(Error::NonFinite("perturbed loss"));
    }
    let g = (loss_plus - loss_minus) / (2.0 * eps as f64);
    Ok(match grad_clip {
        Some(clip) => g.clamp(-clip as f64, clip as f64),
        None => g,
    })
}

/// Zeroth-order update of layers below `partition`.
///
/// Merged: parameters hold `theta - eps z` and become `theta - eps z + (eps - lr g) z`.
/// Unmerged: parameters hold `theta` and become `theta - lr g z`.
pub fn zo_update(
    net: &mut Network,
    partition: usize,
    seed: u32,
    lr: f32,
    grad: f32,
    eps: f32,
    merged: bool,
) {
    let step = if merged { eps - lr * grad } else { -lr * grad };
    if step == 0.0 {
        return;
    }
    for_each_zo_param(net, partition, seed, |theta, z| *theta += step * z);
}

/// One hybrid step on a batch. `seed` selects the perturbation direction.
pub fn train_step(
    net: &mut Network,
    input: &Tensor,
    labels: &[usize],
    cfg: &ZoConfig,
    seed: u32,
    optimizer: &mut BpOptimizer,
) -> Result<StepMetrics> {
    train_step_timed(net, input, labels, cfg, seed, optimizer, &mut NoTimer)
}

pub fn train_step_timed(
    net: &mut Network,
    input: &Tensor,
    labels: &[usize],
    cfg: &ZoConfig,
    seed: u32,
    optimizer: &mut BpOptimizer,
    timer: &mut dyn PhaseTimer,
) -> Result<StepMetrics> {
    cfg.validate(net.depth())?;
    let c = cfg.partition;
    let (eps, lr) = (cfg.eps, cfg.lr);
    let mut m = StepMetrics::default();
    let cache_plus = cfg.bp_activations == BpActivations::Positive;
    let cache_minus = cfg.bp_activations == BpActivations::Negative;
    let merged = cfg.merged && cfg.bp_activations != BpActivations::Unperturbed;

    timed(timer, Phase::ZoPerturb, || perturb_parameters(net, c, seed, 1.0, eps));
    let cache_p = timed(timer, Phase::Forward, || net.forward_cached(input, c))?;
    m.forward_passes += 1;
    m.loss_plus = timed(timer, Phase::Loss, || cross_entropy(cache_p.logits(), labels))?;
    let cache_p = if cache_plus { Some(cache_p) } else { None };

    timed(timer, Phase::ZoPerturb, || perturb_parameters(net, c, seed, -2.0, eps));
    if !m.loss_plus.is_finite() {
        timed(timer, Phase::ZoPerturb, || perturb_parameters(net, c, seed, 1.0, eps));
        m.skipped = true;
        return Ok(m);
    }
    let cache_m = timed(timer, Phase::Forward, || net.forward_cached(input, c))?;
    m.forward_passes += 1;
    m.loss_minus = timed(timer, Phase::Loss, || cross_entropy(cache_m.logits(), labels))?;
    if !m.loss_minus.is_finite() {
        timed(timer, Phase::ZoPerturb, || perturb_parameters(net, c, seed, 1.0, eps));
        m.skipped = true;
        return Ok(m);
    }

    let g = zo_gradient(m.loss_plus, m.loss_minus, eps, cfg.grad_clip)?;
    m.grad = g;

    let cache = if merged {
        timed(timer, Phase::ZoUpdate, || zo_update(net, c, seed, lr, g as f32, eps, true));
        if cache_minus { cache_m } else { cache_p.expect("positive cache kept") }
    } else {
        timed(timer, Phase::ZoPerturb, || perturb_parameters(net, c, seed, 1.0, eps));
        let cache = match cfg.bp_activations {
            BpActivations::Negative => cache_m,
            BpActivations::Positive => cache_p.expect("positive cache kept"),
            BpActivations::Unperturbed => {
                drop(cache_m);
                m.forward_passes += 1;
                timed(timer, Phase::Forward, || net.forward_cached(input, c))?
            }
        };
        timed(timer, Phase::ZoUpdate, || zo_update(net, c, seed, lr, g as f32, eps, false));
        cache
    };

    if c < net.depth() {
        m.bp_loss = cross_entropy(cache.logits(), labels)?;
        let grads = timed(timer, Phase::BpBackward, || net.backward_partial(&cache, labels))?;
        drop(cache);
        timed(timer, Phase::BpBackward, || optimizer.apply(net, &grads, lr));
    } else {
        m.bp_loss = m.loss_minus;
    }
    Ok(m)
}
