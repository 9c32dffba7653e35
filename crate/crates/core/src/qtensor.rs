//! Power-of-two scaled 8-bit tensors and the integer rounding they rely on.
//!
//! A [`QuantTensor`] stores `v * 2^s` as `i8` data plus one exponent `s`.
//! Accumulators from integer matrix products live in [`Accum32`] until
//! [`requantize`] shrinks them back to 7 magnitude bits.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// 8-bit data with a shared power-of-two exponent; every element is in `[-127, 127]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantTensor {
    shape: Vec<usize>,
    data: Vec<i8>,
    pub exponent: i32,
}

impl QuantTensor {
    /// Values of `-128` are rejected.
    pub fn new(shape: Vec<usize>, data: Vec<i8>, exponent: i32) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::BadLength { shape, len: data.len() });
        }
        if data.contains(&i8::MIN) {
            return Err(crate::error::invalid("data", "-128 is outside the int8 range [-127, 127]"));
        }
        Ok(QuantTensor { shape, data, exponent })
    }

    pub fn zeros(shape: Vec<usize>, exponent: i32) -> Self {
        let n = shape.iter().product();
        QuantTensor { shape, data: alloc::vec![0; n], exponent }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[i8] {
        &self.data
    }

    /// Callers must keep elements in `[-127, 127]`.
    pub fn data_mut(&mut self) -> &mut [i8] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn batch(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::BadLength { shape, len: self.data.len() });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn size_bytes(&self) -> usize {
        self.data.len()
    }
}

/// 32-bit integer accumulator with an exponent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Accum32 {
    pub shape: Vec<usize>,
    pub data: Vec<i32>,
    pub exponent: i32,
}

impl Accum32 {
    pub fn new(shape: Vec<usize>, data: Vec<i32>, exponent: i32) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::BadLength { shape, len: data.len() });
        }
        Ok(Accum32 { shape, data, exponent })
    }
}

/// Number of bits needed for `max_abs`: `floor(log2(max_abs)) + 1`, and 0 for 0.
pub fn bitwidth(max_abs: u64) -> u32 {
    u64::BITS - max_abs.leading_zeros()
}

pub fn max_abs<T: Copy + Into<i64>>(values: &[T]) -> u64 {
    values.iter().map(|&v| v.into().unsigned_abs()).max().unwrap_or(0)
}

/// Shifts `v` right by `shift` bits, rounding on the magnitude.
///
/// The discarded bits are split into an upper half `u` (`ceil(shift/2)` bits)
/// and a lower half `w` (`floor(shift/2)` bits). The truncated magnitude is
/// incremented iff `u > w`, so the value's own low bits act as the random
/// source. The sign is reapplied afterwards, which makes the rule symmetric.
#[inline]
pub fn pseudo_stochastic_round_i64(v: i64, shift: u32) -> i64 {
    if shift == 0 {
        return v;
    }
    let mag = v.unsigned_abs();
    if shift >= 64 {
        return 0;
    }
    let mut out = mag >> shift;
    let discarded = mag & ((1u64 << shift) - 1);
    let lo_bits = shift / 2;
    let upper = discarded >> lo_bits;
    let lower = discarded & ((1u64 << lo_bits) - 1);
    if upper > lower {
        out += 1;
    }
    if v < 0 {
        -(out as i64)
    } else {
        out as i64
    }
}

#[inline]
pub fn pseudo_stochastic_round(v: i32, shift: u32) -> i32 {
    pseudo_stochastic_round_i64(v as i64, shift) as i32
}

#[inline]
pub fn clamp_int8(v: i32) -> i8 {
    v.clamp(-127, 127) as i8
}

/// Shift that brings `max_abs` down to `bits` magnitude bits.
pub fn shift_to_bits(max_abs: u64, bits: u32) -> u32 {
    bitwidth(max_abs).saturating_sub(bits)
}

/// Reduces an accumulator to int8: shift by `bitwidth(max|v|) - 7` with
/// pseudo-stochastic rounding and add the shift to the exponent.
pub fn requantize(acc: &Accum32) -> QuantTensor {
    let (data, exponent) = requantize_slice(&acc.data, acc.exponent);
    QuantTensor { shape: acc.shape.clone(), data, exponent }
}

pub(crate) fn requantize_slice(values: &[i32], exponent: i32) -> (Vec<i8>, i32) {
    let shift = shift_to_bits(max_abs(values), 7);
    let data = values
        .iter()
        .map(|&v| clamp_int8(pseudo_stochastic_round(v, shift)))
        .collect();
    (data, exponent + shift as i32)
}

/// Rounds an update accumulator so its largest magnitude fits `bits` bits.
///
/// After rounding, magnitudes are capped at `2^bits - 1`; with `bits = 1`
/// every nonzero entry becomes exactly `+-1`.
pub fn round_to_bits(values: &[i64], bits: u32) -> Vec<i32> {
    let shift = shift_to_bits(max_abs(values), bits);
    let cap = (1i64 << bits) - 1;
    values
        .iter()
        .map(|&v| pseudo_stochastic_round_i64(v, shift).clamp(-cap, cap) as i32)
        .collect()
}
