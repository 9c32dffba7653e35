use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the training kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch { expected: Vec<usize>, actual: Vec<usize> },

    #[error("tensor data length {len} does not match shape {shape:?}")]
    BadLength { shape: Vec<usize>, len: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("partition point {partition} outside 0..={layers}")]
    InvalidPartition { partition: usize, layers: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("activation cache does not cover layer {needed} (starts at {from})")]
    StaleCache { needed: usize, from: usize },

    #[error("layer {layer}: int32 accumulator bound {bound} exceeds i32::MAX")]
    AccumulatorOverflow { layer: usize, bound: u64 },

    #[error("exponent mismatch {delta} exceeds supported range of 16")]
    ExponentMismatch { delta: i32 },

    #[error("empty batch")]
    EmptyBatch,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
