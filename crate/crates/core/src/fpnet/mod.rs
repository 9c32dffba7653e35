//! FP32 network: forward pass, partial backpropagation and first-order updates.
//!
//! Layer positions are 0-based indices into [`Network::layers`]. A partition
//! point `c` splits the stack into `layers[..c]` (zeroth-order side) and
//! `layers[c..]` (backprop side). Activation `a_l` is the output of the first
//! `l` layers, so `a_0` is the network input and `a_L` the logits.

pub(crate) mod kernels;
mod loss;
mod optim;

use alloc::vec;
use alloc::vec::Vec;

pub use loss::{cross_entropy, softmax_ce_grad};
pub use optim::{adam_step, sgd_step, AdamState, BpOptimizer};

use crate::conv::ConvGeom;
use crate::error::{Error, Result};
use crate::layers::{infer_shapes, LayerKind};
use crate::phases::{timed, NoTimer, Phase, PhaseTimer};
use crate::prng::SeededGenerator;
use crate::tensor::Tensor;

/// Weight and bias of one trainable layer. Zeroth-order code treats the pair as
/// the single concatenated vector `theta_l = [weight..., bias...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LayerParams {
    pub fn zeros(layer: &LayerKind) -> Option<Self> {
        Some(LayerParams {
            weight: Tensor::zeros(layer.weight_shape()?),
            bias: Tensor::zeros(vec![layer.bias_len()]),
        })
    }

    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements of `theta_l` in concatenation order.
    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f32> {
        self.weight.data_mut().iter_mut().chain(self.bias.data_mut().iter_mut())
    }

    pub fn iter(&self) -> impl Iterator<Item = &f32> {
        self.weight.data().iter().chain(self.bias.data().iter())
    }

    pub fn size_bytes(&self) -> usize {
        self.weight.size_bytes() + self.bias.size_bytes()
    }
}

/// Outputs `a_from ..= a_L` retained from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationCache {
    from: usize,
    acts: Vec<Tensor>,
}

impl ActivationCache {
    pub fn from_index(&self) -> usize {
        self.from
    }

    /// Activation indices held by the cache.
    pub fn indices(&self) -> core::ops::Range<usize> {
        self.from..self.from + self.acts.len()
    }

    pub fn get(&self, l: usize) -> Result<&Tensor> {
        if l < self.from {
            return Err(Error::StaleCache { needed: l, from: self.from });
        }
        self.acts.get(l - self.from).ok_or(Error::StaleCache { needed: l, from: self.from })
    }

    pub fn logits(&self) -> &Tensor {
        self.acts.last().expect("cache always holds a_L")
    }

    pub fn size_bytes(&self) -> usize {
        self.acts.iter().map(Tensor::size_bytes).sum()
    }
}

/// Parameter gradients for the backprop-trained layers, keyed by layer index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(usize, LayerParams)>,
}

impl Gradients {
    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn get(&self, layer: usize) -> Option<&LayerParams> {
        self.layers.iter().find(|(l, _)| *l == layer).map(|(_, g)| g)
    }

    pub fn size_bytes(&self) -> usize {
        self.layers.iter().map(|(_, g)| g.size_bytes()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<LayerKind>,
    shapes: Vec<Vec<usize>>,
    params: Vec<Option<LayerParams>>,
}

impl Network {
    /// A network with every parameter set to zero.
    pub fn zeros(input_shape: &[usize], layers: Vec<LayerKind>) -> Result<Self> {
        let shapes = infer_shapes(input_shape, &layers)?;
        let params = layers.iter().map(LayerParams::zeros).collect();
        Ok(Network { input_shape: input_shape.to_vec(), layers, shapes, params })
    }

    /// Weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, layer by layer.
    pub fn init_uniform(
        input_shape: &[usize],
        layers: Vec<LayerKind>,
        gen: &mut SeededGenerator,
    ) -> Result<Self> {
        let mut net = Self::zeros(input_shape, layers)?;
        for (layer, params) in net.layers.iter().zip(net.params.iter_mut()) {
            if let Some(p) = params {
                let bound = 1.0 / libm::sqrtf(layer.fan_in() as f32);
                for v in p.iter_mut() {
                    *v = gen.next_uniform_f32(-bound, bound);
                }
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[LayerKind] {
        &self.layers
    }

    /// `L`, the number of layers (trainable or not).
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    /// Per-sample shape of `a_l`.
    pub fn activation_shape(&self, l: usize) -> &[usize] {
        if l == 0 {
            &self.input_shape
        } else {
            &self.shapes[l - 1]
        }
    }

    pub fn num_classes(&self) -> usize {
        self.shapes.last().map(|s| s.iter().product()).unwrap_or(0)
    }

    pub fn params(&self, layer: usize) -> Option<&LayerParams> {
        self.params.get(layer)?.as_ref()
    }

    pub fn params_mut(&mut self, layer: usize) -> Option<&mut LayerParams> {
        self.params.get_mut(layer)?.as_mut()
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().flatten().map(LayerParams::len).sum()
    }

    pub fn check_partition(&self, c: usize) -> Result<()> {
        if c > self.depth() {
            return Err(Error::InvalidPartition { partition: c, layers: self.depth() });
        }
        Ok(())
    }

    fn check_input(&self, input: &Tensor) -> Result<usize> {
        let shape = input.shape();
        if shape.len() != self.input_shape.len() + 1 || shape[1..] != self.input_shape[..] {
            let mut expected = vec![shape.first().copied().unwrap_or(0)];
            expected.extend_from_slice(&self.input_shape);
            return Err(Error::ShapeMismatch { expected, actual: shape.to_vec() });
        }
        if shape[0] == 0 {
            return Err(Error::EmptyBatch);
        }
        Ok(shape[0])
    }

    /// Output of layer `l` (0-based) for a batch of inputs `a_l`.
    fn layer_forward(&self, l: usize, input: &Tensor) -> Tensor {
        let batch = input.batch();
        let in_shape = self.activation_shape(l);
        let mut out_shape = vec![batch];
        out_shape.extend_from_slice(&self.shapes[l]);
        match self.layers[l] {
            LayerKind::Conv2d { .. } => {
                let g = ConvGeom::new(&self.layers[l], in_shape).expect("conv layer");
                let p = self.params[l].as_ref().expect("conv params");
                let mut out = Tensor::zeros(out_shape);
                kernels::conv_forward(
                    &g,
                    input.data(),
                    p.weight.data(),
                    p.bias.data(),
                    batch,
                    out.data_mut(),
                );
                out
            }
            LayerKind::Linear { inputs, outputs } => {
                let p = self.params[l].as_ref().expect("linear params");
                let mut out = Tensor::zeros(out_shape);
                kernels::linear_forward(
                    input.data(),
                    p.weight.data(),
                    p.bias.data(),
                    inputs,
                    outputs,
                    out.data_mut(),
                );
                out
            }
            LayerKind::Relu => {
                let data = input.data().iter().map(|&v| v.max(0.0)).collect();
                Tensor::new(out_shape, data).expect("relu keeps shape")
            }
            LayerKind::MaxPool2d { k } => {
                let mut out = Tensor::zeros(out_shape);
                kernels::maxpool_forward(
                    input.data(),
                    batch * in_shape[0],
                    in_shape[1],
                    in_shape[2],
                    k,
                    out.data_mut(),
                );
                out
            }
            LayerKind::Flatten => input.clone().reshape(out_shape).expect("flatten keeps size"),
        }
    }

    /// Forward pass keeping only the running activation.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut current: Option<Tensor> = None;
        for l in 0..self.layers.len() {
            let next = self.layer_forward(l, current.as_ref().unwrap_or(input));
            debug_assert!(next.all_finite() || !input.all_finite() || !self.params_finite());
            current = Some(next);
        }
        Ok(current.unwrap_or_else(|| input.clone()))
    }

    /// Forward pass retaining `a_from ..= a_L` and nothing below `from`.
    pub fn forward_cached(&self, input: &Tensor, from: usize) -> Result<ActivationCache> {
        self.check_input(input)?;
        self.check_partition(from)?;
        let mut acts = Vec::with_capacity(self.depth() + 1 - from);
        if from == 0 {
            acts.push(input.clone());
        }
        let mut current: Option<Tensor> = None;
        for l in 0..self.layers.len() {
            let src = if l >= from && l > 0 {
                acts.last().expect("cached predecessor")
            } else {
                current.as_ref().unwrap_or(input)
            };
            let next = self.layer_forward(l, src);
            if l + 1 >= from {
                acts.push(next);
                current = None;
            } else {
                current = Some(next);
            }
        }
        Ok(ActivationCache { from, acts })
    }

    fn params_finite(&self) -> bool {
        self.params.iter().flatten().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Backpropagates from the logits in `cache` down to layer `cache.from`.
    ///
    /// Returns gradients for every trainable layer at index `>= from`. The error
    /// is never propagated into `a_from`, so nothing is allocated for layers on
    /// the zeroth-order side.
    pub fn backward_partial(&self, cache: &ActivationCache, labels: &[usize]) -> Result<Gradients> {
        let from = cache.from;
        let depth = self.depth();
        if cache.indices().end != depth + 1 {
            return Err(Error::StaleCache { needed: depth, from });
        }
        let mut grads = Gradients::default();
        if from == depth {
            return Ok(grads);
        }
        let mut err = softmax_ce_grad(cache.logits(), labels)?;
        for l in (from..depth).rev() {
            let input = cache.get(l)?;
            let output = cache.get(l + 1)?;
            let batch = input.batch();
            let in_shape = self.activation_shape(l);
            let need_err_in = l > from;
            let mut err_in_shape = vec![batch];
            err_in_shape.extend_from_slice(in_shape);
            let mut err_in = if need_err_in { Some(Tensor::zeros(err_in_shape)) } else { None };

            match self.layers[l] {
                LayerKind::Conv2d { .. } => {
                    let g = ConvGeom::new(&self.layers[l], in_shape).expect("conv layer");
                    let p = self.params[l].as_ref().expect("conv params");
                    let mut grad = LayerParams::zeros(&self.layers[l]).expect("conv params");
                    kernels::conv_backward(
                        &g,
                        input.data(),
                        err.data(),
                        p.weight.data(),
                        batch,
                        grad.weight.data_mut(),
                        grad.bias.data_mut(),
                        err_in.as_mut().map(|t| t.data_mut()),
                    );
                    grads.layers.push((l, grad));
                }
                LayerKind::Linear { inputs, outputs } => {
                    let p = self.params[l].as_ref().expect("linear params");
                    let mut grad = LayerParams::zeros(&self.layers[l]).expect("linear params");
                    kernels::linear_backward(
                        input.data(),
                        err.data(),
                        p.weight.data(),
                        inputs,
                        outputs,
                        grad.weight.data_mut(),
                        grad.bias.data_mut(),
                        err_in.as_mut().map(|t| t.data_mut()),
                    );
                    grads.layers.push((l, grad));
                }
                LayerKind::Relu => {
                    if let Some(ei) = err_in.as_mut() {
                        for ((d, &e), &a) in ei.data_mut().iter_mut().zip(err.data()).zip(output.data()) {
                            *d = if a > 0.0 { e } else { 0.0 };
                        }
                    }
                }
                LayerKind::MaxPool2d { k } => {
                    if let Some(ei) = err_in.as_mut() {
                        kernels::maxpool_backward(
                            input.data(),
                            err.data(),
                            batch * in_shape[0],
                            in_shape[1],
                            in_shape[2],
                            k,
                            ei.data_mut(),
                        );
                    }
                }
                LayerKind::Flatten => {
                    if let Some(ei) = err_in.as_mut() {
                        ei.data_mut().copy_from_slice(err.data());
                    }
                }
            }
            match err_in {
                Some(e) => err = e,
                None => break,
            }
        }
        grads.layers.reverse();
        Ok(grads)
    }

    /// Applies `update(params, grads)` for every layer in `grads`.
    pub fn apply_gradients(
        &mut self,
        grads: &Gradients,
        mut update: impl FnMut(usize, &mut LayerParams, &LayerParams),
    ) {
        for (l, g) in &grads.layers {
            if let Some(p) = self.params_mut(*l) {
                update(*l, p, g);
            }
        }
    }
}

/// Plain backprop step: forward with full cache, backward, optimizer update.
/// Returns the batch loss before the update.
pub fn bp_step(
    net: &mut Network,
    input: &Tensor,
    labels: &[usize],
    optimizer: &mut BpOptimizer,
    lr: f32,
) -> Result<f64> {
    bp_step_timed(net, input, labels, optimizer, lr, &mut NoTimer)
}

pub fn bp_step_timed(
    net: &mut Network,
    input: &Tensor,
    labels: &[usize],
    optimizer: &mut BpOptimizer,
    lr: f32,
    timer: &mut dyn PhaseTimer,
) -> Result<f64> {
    let cache = timed(timer, Phase::Forward, || net.forward_cached(input, 0))?;
    let loss = timed(timer, Phase::Loss, || cross_entropy(cache.logits(), labels))?;
    let grads = timed(timer, Phase::BpBackward, || net.backward_partial(&cache, labels))?;
    drop(cache);
    timed(timer, Phase::BpBackward, || optimizer.apply(net, &grads, lr));
    Ok(loss)
}

#[cfg(test)]
mod tests;
