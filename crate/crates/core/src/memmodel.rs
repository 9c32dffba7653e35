//! Closed-form training-memory accounting.
//!
//! Static allocation is assumed: every buffer a mode needs is counted for the
//! whole step, with no lifetime-based reuse. Layer `l` below is 0-based; a
//! partition `c` means layers `[0, c)` are trained zeroth-order.
//!
//! FP32 (4 bytes per element):
//! - parameters of every trainable layer,
//! - the output of every layer for `B` samples (the input batch is not counted,
//!   and a flatten aliases its input so it contributes nothing),
//! - gradients of trainable layers `l >= c`,
//! - errors for the outputs of layers `l >= c`,
//! - with Adam, two moment tensors per backprop-trained parameter.
//!
//! INT8 (1 byte per int8 element, 4 per int32 element) counts the same
//! parameter, activation, gradient and error elements in int8, plus int32
//! scratch: the pre-requantization output of every trainable layer, the int32
//! gradient of every trainable layer `l >= c`, and the int32 input error of every
//! trainable layer `l > c`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::layers::{infer_shapes, LayerKind};

/// Memory-relevant sizes of one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerCost {
    pub kind: LayerKind,
    /// Parameter elements `|theta_l|` (zero for parameter-free layers).
    pub params: u64,
    /// Output elements per sample `|a_l|`.
    pub out_elems: u64,
    /// Output storage is a view of the input (flatten).
    pub aliases_input: bool,
}

impl LayerCost {
    pub fn trainable(&self) -> bool {
        self.kind.has_params()
    }

    /// Bytes-per-element-free activation count per sample.
    fn stored_elems(&self) -> u64 {
        if self.aliases_input {
            0
        } else {
            self.out_elems
        }
    }
}

/// Per-layer sizes of a network, independent of batch size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeSpec {
    pub layers: Vec<LayerCost>,
}

impl ShapeSpec {
    /// Sizes for a layer stack; `with_bias` includes bias elements in `|theta_l|`.
    pub fn from_layers(input: &[usize], layers: &[LayerKind], with_bias: bool) -> Result<Self> {
        let shapes = infer_shapes(input, layers)?;
        let layers = layers
            .iter()
            .zip(&shapes)
            .map(|(kind, shape)| LayerCost {
                kind: *kind,
                params: kind.param_count(with_bias) as u64,
                out_elems: shape.iter().product::<usize>() as u64,
                aliases_input: matches!(kind, LayerKind::Flatten),
            })
            .collect();
        Ok(ShapeSpec { layers })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn param_count(&self) -> u64 {
        self.layers.iter().map(|l| l.params).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    FullBp,
    FullZo,
    /// Layers `[0, c)` zeroth-order, the rest backprop.
    Elastic(usize),
}

impl Mode {
    pub fn partition(self, depth: usize) -> usize {
        match self {
            Mode::FullBp => 0,
            Mode::FullZo => depth,
            Mode::Elastic(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    Fp32,
    Int8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

/// Byte counts per category for one mode; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryReport {
    pub mode: Mode,
    pub precision: Precision,
    pub optimizer: OptimizerKind,
    pub partition: usize,
    pub params: u64,
    pub activations: u64,
    pub grads: u64,
    pub errors: u64,
    pub optimizer_state: u64,
    pub int32_scratch: u64,
    pub total: u64,
}

impl MemoryReport {
    fn finish(mut self) -> Self {
        self.total = self.params
            + self.activations
            + self.grads
            + self.errors
            + self.optimizer_state
            + self.int32_scratch;
        self
    }
}

struct Counts {
    params: u64,
    acts_per_sample: u64,
    bp_params: u64,
    errs_per_sample: u64,
}

fn counts(spec: &ShapeSpec, c: usize) -> Counts {
    let tail = &spec.layers[c..];
    Counts {
        params: spec.param_count(),
        acts_per_sample: spec.layers.iter().map(LayerCost::stored_elems).sum(),
        bp_params: tail.iter().filter(|l| l.trainable()).map(|l| l.params).sum(),
        errs_per_sample: tail.iter().map(LayerCost::stored_elems).sum(),
    }
}

fn check(spec: &ShapeSpec, batch: u64, mode: Mode) -> Result<usize> {
    if batch == 0 {
        return Err(Error::EmptyBatch);
    }
    let c = mode.partition(spec.depth());
    if c > spec.depth() {
        return Err(Error::InvalidPartition { partition: c, layers: spec.depth() });
    }
    Ok(c)
}

pub fn mem_fp32(
    spec: &ShapeSpec,
    batch: u64,
    mode: Mode,
    optimizer: OptimizerKind,
) -> Result<MemoryReport> {
    let c = check(spec, batch, mode)?;
    let n = counts(spec, c);
    Ok(MemoryReport {
        mode,
        precision: Precision::Fp32,
        optimizer,
        partition: c,
        params: 4 * n.params,
        activations: 4 * batch * n.acts_per_sample,
        grads: 4 * n.bp_params,
        errors: 4 * batch * n.errs_per_sample,
        optimizer_state: match optimizer {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam => 2 * 4 * n.bp_params,
        },
        int32_scratch: 0,
        total: 0,
    }
    .finish())
}

pub fn mem_int8(spec: &ShapeSpec, batch: u64, mode: Mode) -> Result<MemoryReport> {
    let c = check(spec, batch, mode)?;
    let n = counts(spec, c);
    let acc_out: u64 = spec.layers.iter().filter(|l| l.trainable()).map(|l| l.out_elems).sum();
    // Input error of trainable layer l > c is the output of layer l - 1.
    let err_in: u64 = (c + 1..spec.depth())
        .filter(|&l| spec.layers[l].trainable())
        .map(|l| spec.layers[l - 1].out_elems)
        .sum();
    Ok(MemoryReport {
        mode,
        precision: Precision::Int8,
        optimizer: OptimizerKind::Sgd,
        partition: c,
        params: n.params,
        activations: batch * n.acts_per_sample,
        grads: n.bp_params,
        errors: batch * n.errs_per_sample,
        optimizer_state: 0,
        int32_scratch: 4 * (batch * acc_out + n.bp_params + batch * err_in),
        total: 0,
    }
    .finish())
}

/// Reports for every partition point `0..=L`.
pub fn partition_sweep(
    spec: &ShapeSpec,
    batch: u64,
    precision: Precision,
    optimizer: OptimizerKind,
) -> Result<Vec<MemoryReport>> {
    (0..=spec.depth())
        .map(|c| match precision {
            Precision::Fp32 => mem_fp32(spec, batch, Mode::Elastic(c), optimizer),
            Precision::Int8 => mem_int8(spec, batch, Mode::Elastic(c)),
        })
        .collect()
}
