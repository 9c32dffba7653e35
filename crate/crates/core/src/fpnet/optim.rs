use alloc::vec;
use alloc::vec::Vec;

use super::{Gradients, LayerParams, Network};

/// `theta <- theta - lr * g`, elementwise.
pub fn sgd_step(params: &mut [f32], grads: &[f32], lr: f32) {
    for (p, &g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
}

/// First and second moment estimates for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f32>,
    pub v: Vec<f32>,
    pub t: u32,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn size_bytes(&self) -> usize {
        (self.m.len() + self.v.len()) * core::mem::size_of::<f32>()
    }
}

pub const ADAM_BETA1: f32 = 0.9;
pub const ADAM_BETA2: f32 = 0.999;
pub const ADAM_EPS: f32 = 1e-8;

/// Adam with bias correction.
pub fn adam_step(
    params: &mut [f32],
    grads: &[f32],
    state: &mut AdamState,
    lr: f32,
    beta1: f32,
    beta2: f32,
) {
    state.t += 1;
    let c1 = 1.0 - libm::powf(beta1, state.t as f32);
    let c2 = 1.0 - libm::powf(beta2, state.t as f32);
    for (((p, &g), m), v) in
        params.iter_mut().zip(grads).zip(state.m.iter_mut()).zip(state.v.iter_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (libm::sqrtf(v_hat) + ADAM_EPS);
    }
}

/// Optimizer for the backprop-trained layers.
#[derive(Debug, Clone, PartialEq)]
pub enum BpOptimizer {
    Sgd,
    /// Adam states indexed by layer, allocated on first use.
    Adam(Vec<Option<AdamState>>),
}

impl BpOptimizer {
    pub fn adam() -> Self {
        BpOptimizer::Adam(Vec::new())
    }

    pub fn apply(&mut self, net: &mut Network, grads: &Gradients, lr: f32) {
        match self {
            BpOptimizer::Sgd => net.apply_gradients(grads, |_, p, g| {
                sgd_step(p.weight.data_mut(), g.weight.data(), lr);
                sgd_step(p.bias.data_mut(), g.bias.data(), lr);
            }),
            BpOptimizer::Adam(states) => net.apply_gradients(grads, |l, p, g| {
                if states.len() <= l {
                    states.resize(l + 1, None);
                }
                let state = states[l].get_or_insert_with(|| AdamState::new(p.len()));
                adam_layer(p, g, state, lr);
            }),
        }
    }

    /// Bytes held by optimizer state.
    pub fn state_bytes(&self) -> usize {
        match self {
            BpOptimizer::Sgd => 0,
            BpOptimizer::Adam(states) => states.iter().flatten().map(AdamState::size_bytes).sum(),
        }
    }
}

fn adam_layer(p: &mut LayerParams, g: &LayerParams, state: &mut AdamState, lr: f32) {
    let mut flat_p: Vec<f32> = p.iter().copied().collect();
    let flat_g: Vec<f32> = g.iter().copied().collect();
    adam_step(&mut flat_p, &flat_g, state, lr, ADAM_BETA1, ADAM_BETA2);
    for (dst, src) in p.iter_mut().zip(flat_p) {
        *dst = src;
    }
}
