//! Integer-only network: int8 weights with a fixed exponent, int8 activations
//! and errors with dynamic exponents, int32 accumulators.
//!
//! Trainable layers carry no bias. Every product `int8 x int8` is accumulated in
//! int32 under the exponent `s_in + s_theta` and requantized back to int8.
//! Nothing in this module touches floating point.

pub(crate) mod kernels;
mod loss;

use alloc::vec;
use alloc::vec::Vec;

pub use loss::int_ce_output_grad;

use crate::conv::ConvGeom;
use crate::error::{Error, Result};
use crate::fpnet::kernels::{maxpool_backward, maxpool_forward};
use crate::layers::{infer_shapes, LayerKind};
use crate::prng::SeededGenerator;
use crate::qtensor::{clamp_int8, requantize_slice, round_to_bits, QuantTensor};

/// Exponent of every parameter tensor.
pub const PARAM_EXPONENT: i32 = -7;
/// Weights are initialized uniform on `[-INIT_RANGE, INIT_RANGE]`.
pub const INIT_RANGE: u8 = 64;
/// Exponent of quantized inputs in `[0, 1]`.
pub const INPUT_EXPONENT: i32 = -7;

const MAX_PRODUCT: u64 = 127 * 127;

/// Int8 outputs `a_from ..= a_L` retained from one forward pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantCache {
    from: usize,
    acts: Vec<QuantTensor>,
}

impl QuantCache {
    pub fn from_index(&self) -> usize {
        self.from
    }

    pub fn indices(&self) -> core::ops::Range<usize> {
        self.from..self.from + self.acts.len()
    }

    pub fn get(&self, l: usize) -> Result<&QuantTensor> {
        if l < self.from {
            return Err(Error::StaleCache { needed: l, from: self.from });
        }
        self.acts.get(l - self.from).ok_or(Error::StaleCache { needed: l, from: self.from })
    }

    pub fn logits(&self) -> &QuantTensor {
        self.acts.last().expect("cache always holds a_L")
    }

    pub fn size_bytes(&self) -> usize {
        self.acts.iter().map(QuantTensor::size_bytes).sum()
    }
}

/// Summary of one integer backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BackwardStats {
    /// Parameters whose value changed.
    pub changed: usize,
    /// Bytes of int32/int64 scratch allocated for gradients and errors.
    pub scratch_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantNetwork {
    input_shape: Vec<usize>,
    layers: Vec<LayerKind>,
    shapes: Vec<Vec<usize>>,
    params: Vec<Option<QuantTensor>>,
}

impl QuantNetwork {
    /// Zero weights at [`PARAM_EXPONENT`]. Fails if any layer could overflow int32.
    pub fn zeros(input_shape: &[usize], layers: Vec<LayerKind>) -> Result<Self> {
        let shapes = infer_shapes(input_shape, &layers)?;
        for (l, layer) in layers.iter().enumerate() {
            let terms = match *layer {
                LayerKind::Conv2d { out_ch, kernel, .. } => {
                    (layer.fan_in() as u64).max((out_ch * kernel * kernel) as u64)
                }
                LayerKind::Linear { inputs, outputs } => (inputs as u64).max(outputs as u64),
                _ => 0,
            };
            let bound = terms * MAX_PRODUCT;
            if bound > i32::MAX as u64 {
                return Err(Error::AccumulatorOverflow { layer: l, bound });
            }
        }
        let params = layers
            .iter()
            .map(|layer| {
                layer.weight_shape().map(|shape| QuantTensor::zeros(shape, PARAM_EXPONENT))
            })
            .collect();
        Ok(QuantNetwork { input_shape: input_shape.to_vec(), layers, shapes, params })
    }

    /// Weights uniform on `[-INIT_RANGE, INIT_RANGE]`, drawn layer by layer.
    pub fn init_uniform(
        input_shape: &[usize],
        layers: Vec<LayerKind>,
        gen: &mut SeededGenerator,
    ) -> Result<Self> {
        let mut net = Self::zeros(input_shape, layers)?;
        for w in net.params.iter_mut().flatten() {
            let values = gen.uniform_int8_vector(w.len(), INIT_RANGE)?;
            w.data_mut().copy_from_slice(&values);
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[LayerKind] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

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

    pub fn weights(&self, layer: usize) -> Option<&QuantTensor> {
        self.params.get(layer)?.as_ref()
    }

    pub fn weights_mut(&mut self, layer: usize) -> Option<&mut QuantTensor> {
        self.params.get_mut(layer)?.as_mut()
    }

    /// Replaces a layer's weights (and with them the layer's fixed exponent).
    pub fn set_weights(&mut self, layer: usize, weights: QuantTensor) -> Result<()> {
        let current = self.weights_mut(layer).ok_or(Error::InvalidParameter {
            name: "layer",
            reason: alloc::format!("layer {layer} has no parameters"),
        })?;
        if current.shape() != weights.shape() {
            return Err(Error::ShapeMismatch {
                expected: current.shape().to_vec(),
                actual: weights.shape().to_vec(),
            });
        }
        *current = weights;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().flatten().map(QuantTensor::len).sum()
    }

    pub fn check_partition(&self, c: usize) -> Result<()> {
        if c > self.depth() {
            return Err(Error::InvalidPartition { partition: c, layers: self.depth() });
        }
        Ok(())
    }

    fn check_input(&self, input: &QuantTensor) -> Result<usize> {
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

    fn layer_forward(&self, l: usize, input: &QuantTensor) -> QuantTensor {
        let batch = input.batch();
        let in_shape = self.activation_shape(l);
        let mut out_shape = vec![batch];
        out_shape.extend_from_slice(&self.shapes[l]);
        let out_len: usize = out_shape.iter().product();
        match self.layers[l] {
            LayerKind::Conv2d { .. } | LayerKind::Linear { .. } => {
                let w = self.params[l].as_ref().expect("trainable layer has weights");
                let mut acc = vec![0i32; out_len];
                match self.layers[l] {
                    LayerKind::Conv2d { .. } => {
                        let g = ConvGeom::new(&self.layers[l], in_shape).expect("conv layer");
                        kernels::conv_forward(&g, input.data(), w.data(), batch, &mut acc);
                    }
                    LayerKind::Linear { inputs, outputs } => {
                        kernels::linear_forward(input.data(), w.data(), inputs, outputs, &mut acc);
                    }
                    _ => unreachable!(),
                }
                let (data, exponent) = requantize_slice(&acc, input.exponent + w.exponent);
                QuantTensor::new(out_shape, data, exponent).expect("requantized data is in range")
            }
            LayerKind::Relu => {
                let data = input.data().iter().map(|&v| v.max(0)).collect();
                QuantTensor::new(out_shape, data, input.exponent).expect("relu keeps range")
            }
            LayerKind::MaxPool2d { k } => {
                let mut out = QuantTensor::zeros(out_shape, input.exponent);
                maxpool_forward(
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

    pub fn forward(&self, input: &QuantTensor) -> Result<QuantTensor> {
        self.check_input(input)?;
        let mut current: Option<QuantTensor> = None;
        for l in 0..self.depth() {
            current = Some(self.layer_forward(l, current.as_ref().unwrap_or(input)));
        }
        Ok(current.unwrap_or_else(|| input.clone()))
    }

    /// Forward pass retaining `a_from ..= a_L`.
    pub fn forward_cached(&self, input: &QuantTensor, from: usize) -> Result<QuantCache> {
        self.check_input(input)?;
        self.check_partition(from)?;
        let mut acts = Vec::with_capacity(self.depth() + 1 - from);
        if from == 0 {
            acts.push(input.clone());
        }
        let mut current: Option<QuantTensor> = None;
        for l in 0..self.depth() {
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
        Ok(QuantCache { from, acts })
    }

    /// Integer backpropagation from the logits down to layer `cache.from`,
    /// updating each trainable layer in place.
    ///
    /// Errors travel as int8 tensors, requantized after every trainable layer.
    /// Each weight update is the int64 gradient sum rounded to `b_bp` bits,
    /// subtracted and clamped to `[-127, 127]`.
    pub fn backward_partial(
        &mut self,
        cache: &QuantCache,
        labels: &[usize],
        b_bp: u32,
    ) -> Result<BackwardStats> {
        let from = cache.from;
        let depth = self.depth();
        let mut stats = BackwardStats::default();
        if cache.indices().end != depth + 1 {
            return Err(Error::StaleCache { needed: depth, from });
        }
        if !(1..=7).contains(&b_bp) {
            return Err(crate::error::invalid("b_bp", alloc::format!("{b_bp} is outside 1..=7")));
        }
        if from == depth {
            return Ok(stats);
        }
        let mut err = int_ce_output_grad(cache.logits(), labels)?;
        for l in (from..depth).rev() {
            let input = cache.get(l)?;
            let output = cache.get(l + 1)?;
            let batch = input.batch();
            let in_shape = self.activation_shape(l).to_vec();
            let need_err_in = l > from;
            let mut err_shape = vec![batch];
            err_shape.extend_from_slice(&in_shape);
            let in_len: usize = err_shape.iter().product();

            let next = match self.layers[l] {
                LayerKind::Conv2d { .. } | LayerKind::Linear { .. } => {
                    let w = self.params[l].as_ref().expect("trainable layer has weights");
                    let mut grad = vec![0i64; w.len()];
                    let mut err_acc = if need_err_in { Some(vec![0i32; in_len]) } else { None };
                    stats.scratch_bytes += grad.len() * 8 + err_acc.as_ref().map_or(0, |e| e.len() * 4);
                    match self.layers[l] {
                        LayerKind::Conv2d { .. } => {
                            let g = ConvGeom::new(&self.layers[l], &in_shape).expect("conv layer");
                            kernels::conv_backward(
                                &g,
                                input.data(),
                                err.data(),
                                w.data(),
                                batch,
                                &mut grad,
                                err_acc.as_deref_mut(),
                            );
                        }
                        LayerKind::Linear { inputs, outputs } => {
                            kernels::linear_backward(
                                input.data(),
                                err.data(),
                                w.data(),
                                inputs,
                                outputs,
                                &mut grad,
                                err_acc.as_deref_mut(),
                            );
                        }
                        _ => unreachable!(),
                    }
                    let next = err_acc.map(|acc| {
                        let (data, exponent) = requantize_slice(&acc, err.exponent + w.exponent);
                        QuantTensor::new(err_shape, data, exponent).expect("requantized error")
                    });
                    let update = round_to_bits(&grad, b_bp);
                    drop(grad);
                    let w = self.params[l].as_mut().expect("trainable layer has weights");
                    for (theta, &u) in w.data_mut().iter_mut().zip(&update) {
                        if u != 0 {
                            let new = clamp_int8(*theta as i32 - u);
                            stats.changed += (new != *theta) as usize;
                            *theta = new;
                        }
                    }
                    next
                }
                LayerKind::Relu => need_err_in.then(|| {
                    let data = err
                        .data()
                        .iter()
                        .zip(output.data())
                        .map(|(&e, &a)| if a > 0 { e } else { 0 })
                        .collect();
                    QuantTensor::new(err_shape, data, err.exponent).expect("relu error")
                }),
                LayerKind::MaxPool2d { k } => need_err_in.then(|| {
                    let mut e = QuantTensor::zeros(err_shape, err.exponent);
                    maxpool_backward(
                        input.data(),
                        err.data(),
                        batch * in_shape[0],
                        in_shape[1],
                        in_shape[2],
                        k,
                        e.data_mut(),
                    );
                    e
                }),
                LayerKind::Flatten => {
                    need_err_in.then(|| err.clone().reshape(err_shape).expect("flatten error"))
                }
            };
            match next {
                Some(e) => err = e,
                None => break,
            }
        }
        Ok(stats)
    }
}

/// Index of the largest logit per row, first index on ties.
pub fn argmax_rows(logits: &QuantTensor) -> Vec<usize> {
    let classes = logits.shape().last().copied().unwrap_or(1).max(1);
    logits
        .data()
        .chunks_exact(classes)
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}
