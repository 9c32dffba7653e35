//! Layer kinds shared by the FP32 and INT8 networks.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One layer of a feed-forward stack. Convolutions are stride 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d { in_ch: usize, out_ch: usize, kernel: usize, pad: usize },
    Linear { inputs: usize, outputs: usize },
    Relu,
    MaxPool2d { k: usize },
    Flatten,
}

impl LayerKind {
    pub fn conv5x5(in_ch: usize, out_ch: usize) -> Self {
        LayerKind::Conv2d { in_ch, out_ch, kernel: 5, pad: 2 }
    }

    pub fn linear(inputs: usize, outputs: usize) -> Self {
        LayerKind::Linear { inputs, outputs }
    }

    /// Member of the trainable set.
    pub fn has_params(&self) -> bool {
        matches!(self, LayerKind::Conv2d { .. } | LayerKind::Linear { .. })
    }

    pub fn weight_shape(&self) -> Option<Vec<usize>> {
        match *self {
            LayerKind::Conv2d { in_ch, out_ch, kernel, .. } => {
                Some(vec![out_ch, in_ch, kernel, kernel])
            }
            LayerKind::Linear { inputs, outputs } => Some(vec![outputs, inputs]),
            _ => None,
        }
    }

    pub fn bias_len(&self) -> usize {
        match *self {
            LayerKind::Conv2d { out_ch, .. } => out_ch,
            LayerKind::Linear { outputs, .. } => outputs,
            _ => 0,
        }
    }

    pub fn weight_len(&self) -> usize {
        self.weight_shape().map(|s| s.iter().product()).unwrap_or(0)
    }

    /// Number of input features feeding one output unit.
    pub fn fan_in(&self) -> usize {
        match *self {
            LayerKind::Conv2d { in_ch, kernel, .. } => in_ch * kernel * kernel,
            LayerKind::Linear { inputs, .. } => inputs,
            _ => 0,
        }
    }

    pub fn param_count(&self, with_bias: bool) -> usize {
        self.weight_len() + if with_bias { self.bias_len() } else { 0 }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |expected: Vec<usize>| Error::ShapeMismatch {
            expected,
            actual: input.to_vec(),
        };
        match *self {
            LayerKind::Conv2d { in_ch, out_ch, kernel, pad } => {
                if input.len() != 3 || input[0] != in_ch {
                    return Err(mismatch(vec![in_ch, 0, 0]));
                }
                let (h, w) = (input[1] + 2 * pad, input[2] + 2 * pad);
                if h < kernel || w < kernel {
                    return Err(mismatch(vec![in_ch, kernel, kernel]));
                }
                Ok(vec![out_ch, h - kernel + 1, w - kernel + 1])
            }
            LayerKind::Linear { inputs, outputs } => {
                if input != [inputs] {
                    return Err(mismatch(vec![inputs]));
                }
                Ok(vec![outputs])
            }
            LayerKind::Relu => Ok(input.to_vec()),
            LayerKind::MaxPool2d { k } => {
                if input.len() != 3 || k == 0 || input[1] % k != 0 || input[2] % k != 0 {
                    return Err(mismatch(vec![input.first().copied().unwrap_or(0), k, k]));
                }
                Ok(vec![input[0], input[1] / k, input[2] / k])
            }
            LayerKind::Flatten => Ok(vec![input.iter().product()]),
        }
    }
}

/// Per-sample output shapes of every layer, checking that the stack chains.
pub fn infer_shapes(input: &[usize], layers: &[LayerKind]) -> Result<Vec<Vec<usize>>> {
    let mut shapes = Vec::with_capacity(layers.len());
    let mut current = input.to_vec();
    for layer in layers {
        current = layer.output_shape(&current)?;
        shapes.push(current.clone());
    }
    Ok(shapes)
}

/// LeNet-5 with padded 5x5 convolutions: 107,786 parameters including biases.
pub fn lenet5() -> Vec<LayerKind> {
    vec![
        LayerKind::conv5x5(1, 6),
        LayerKind::Relu,
        LayerKind::MaxPool2d { k: 2 },
        LayerKind::conv5x5(6, 16),
        LayerKind::Relu,
        LayerKind::MaxPool2d { k: 2 },
        LayerKind::Flatten,
        LayerKind::linear(784, 120),
        LayerKind::Relu,
        LayerKind::linear(120, 84),
        LayerKind::Relu,
        LayerKind::linear(84, 10),
    ]
}

pub const MNIST_INPUT: [usize; 3] = [1, 28, 28];

/// Partition point that leaves the last `bp_layers` trainable layers to backprop.
///
/// The boundary sits directly before the first backprop-trained layer, so the
/// activation following the last zeroth-order layer stays on the ZO side.
pub fn partition_for_bp_tail(layers: &[LayerKind], bp_layers: usize) -> usize {
    if bp_layers == 0 {
        return layers.len();
    }
    let trainable: Vec<usize> = (0..layers.len()).filter(|&i| layers[i].has_params()).collect();
    if bp_layers >= trainable.len() {
        return 0;
    }
    // 0-based index of the first BP layer equals the 1-based boundary C.
    trainable[trainable.len() - bp_layers]
}
