//! Integer power-of-two approximation of `exp`, shared by the integer
//! cross-entropy gradient and the loss-difference sign estimator.
//!
//! `exp(d * 2^s) = 2^(log2(e) * d * 2^s)` and `log2(e)` is approximated by
//! `47274 * 2^-15`, so the base-2 exponent of a logit difference `d` at scale
//! `s` is `47274 * d * 2^(s - 15)`, computed with one multiply and one shift.

/// `log2(e)` in Q15.
pub const LOG2E_Q15: i64 = 47_274;

/// Largest exponent mismatch between two logit tensors that can be rescaled.
pub const MAX_EXPONENT_GAP: i32 = 16;

/// Base-2 exponent of `exp(diff * 2^s)`, in units of `2^-frac_bits`.
///
/// Right shifts are arithmetic, so `round = false` floors. With `round = true`
/// half a unit is added first.
#[inline]
pub fn exp2_exponent(diff: i64, s: i32, frac_bits: u32, round: bool) -> i64 {
    let prod = LOG2E_Q15 * diff;
    let shift = 15 - s - frac_bits as i32;
    if shift > 0 {
        let shift = shift.min(62) as u32;
        let bias = if round { 1i64 << (shift - 1) } else { 0 };
        (prod + bias) >> shift
    } else {
        // Logits this coarse saturate every useful exponent range anyway.
        let shift = (-shift).min(24) as u32;
        prod.saturating_mul(1i64 << shift)
    }
}

/// `floor(log2(n))` for `n >= 1`, from the leading-zero count.
#[inline]
pub fn floor_log2(n: u64) -> u32 {
    debug_assert!(n > 0);
    63 - n.leading_zeros()
}

/// Fractional exponent bits used by [`pow2_neg_q16`].
pub const SOFTMAX_FRAC_BITS: u32 = 4;

/// `round(65536 * 2^(-k/16))` for `k` in `0..16`.
const POW2_FRAC_Q16: [u32; 16] = [
    65536, 62757, 60097, 57549, 55109, 52773, 50535, 48393, 46341, 44376, 42495, 40693, 38968,
    37316, 35734, 34219,
];

/// `2^(t / 16)` in Q16 for `t <= 0`; underflows to 0 below `2^-16`.
#[inline]
pub fn pow2_neg_q16(t: i64) -> u32 {
    debug_assert!(t <= 0);
    let n = t.unsigned_abs();
    let whole = n >> SOFTMAX_FRAC_BITS;
    if whole > 16 {
        return 0;
    }
    POW2_FRAC_Q16[(n & 15) as usize] >> whole
}
