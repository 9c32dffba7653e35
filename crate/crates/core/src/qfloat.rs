//! Floating-point views of quantized values.
//!
//! Integer training never calls into this module except through
//! [`SignMode::FloatReference`](crate::zo_int8::SignMode), and every function
//! that does float work on the training path takes a [`FloatOps`] counter.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::fpnet::{cross_entropy, Network};
use crate::qnet::{QuantNetwork, INPUT_EXPONENT};
use crate::qtensor::QuantTensor;
use crate::tensor::Tensor;

/// Count of floating-point operations executed on behalf of a training step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FloatOps(pub u64);

impl FloatOps {
    pub fn add(&mut self, n: usize) {
        self.0 += n as u64;
    }
}

/// `round(pixel * 127)` (halves up) at exponent -7. Pixels must lie in `[0, 1]`.
pub fn quantize_input(images: &Tensor) -> Result<QuantTensor> {
    let mut data = Vec::with_capacity(images.len());
    for &v in images.data() {
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid("input", alloc::format!("pixel {v} is outside [0, 1]")));
        }
        data.push(libm::floorf(v * 127.0 + 0.5) as i8);
    }
    QuantTensor::new(images.shape().to_vec(), data, INPUT_EXPONENT)
}

/// `data * 2^exponent` as `f32`.
pub fn dequantize(q: &QuantTensor) -> Tensor {
    let data = q.data().iter().map(|&v| libm::ldexpf(v as f32, q.exponent)).collect();
    Tensor::new(q.shape().to_vec(), data).expect("same shape")
}

/// FP32 network with the dequantized weights and zero biases.
pub fn dequantize_network(net: &QuantNetwork) -> Network {
    let mut out = Network::zeros(net.input_shape(), net.layers().to_vec()).expect("valid layers");
    for l in 0..net.depth() {
        if let (Some(w), Some(p)) = (net.weights(l), out.params_mut(l)) {
            p.weight.data_mut().copy_from_slice(dequantize(w).data());
        }
    }
    out
}

/// Mean cross-entropy of dequantized logits.
pub fn dequantized_cross_entropy(logits: &QuantTensor, labels: &[usize], ops: &mut FloatOps) -> Result<f64> {
    // One dequantize, exp and add per element plus the per-row log.
    ops.add(3 * logits.len() + labels.len());
    cross_entropy(&dequantize(logits), labels)
}

/// Sign of `CE(plus) - CE(minus)` evaluated in floating point.
pub fn float_loss_sign(
    plus: &QuantTensor,
    minus: &QuantTensor,
    labels: &[usize],
    ops: &mut FloatOps,
) -> Result<i8> {
    let diff = dequantized_cross_entropy(plus, labels, ops)?
        - dequantized_cross_entropy(minus, labels, ops)?;
    ops.add(1);
    Ok(if diff > 0.0 {
        1
    } else if diff < 0.0 {
        -1
    } else {
        0
    })
}
