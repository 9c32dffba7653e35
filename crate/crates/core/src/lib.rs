//! Hybrid zeroth-order / backpropagation training for small feed-forward
//! networks, in FP32 and in integer-only 8-bit arithmetic.
//!
//! The crate is `no_std` with `alloc`. Layers `[0, C)` of a network are trained
//! with a two-point SPSA estimate whose perturbation is replayed from a seed;
//! layers `[C, L)` are trained by ordinary backpropagation.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod conv;
pub mod data;
pub mod error;
pub mod fixed;
pub mod fpnet;
pub mod layers;
pub mod memmodel;
pub mod phases;
pub mod prng;
pub mod qfloat;
pub mod qnet;
pub mod qtensor;
pub mod signtest;
pub mod tensor;
pub mod zo;
pub mod zo_int8;

pub use error::{Error, Result};
pub use layers::{lenet5, LayerKind, MNIST_INPUT};
pub use prng::{SeededGenerator, ZeroProb};
pub use tensor::Tensor;
