//! Replayable random streams.
//!
//! Every perturbation vector in a zeroth-order step is regenerated from a
//! 32-bit seed instead of being stored. The raw stream is SplitMix64
//! (Steele, Lea and Flood), whose state is a 64-bit Weyl counter. That makes
//! random access trivial: the `k`-th word after seeding is a pure function of
//! `seed + k * GAMMA`, which the sparse INT8 sampler uses to read the mask and
//! the magnitudes side by side without buffering either.
//!
//! Stream consumption per draw is fixed:
//!
//! | sampler              | words consumed for `n` outputs |
//! |----------------------|--------------------------------|
//! | `gaussian_vector`    | `2 * ceil(n / 2)` (Box-Muller, both outputs used) |
//! | `uniform_int8_vector`| `n` |
//! | `bernoulli_mask`     | `n` |
//! | `sparse_int8_for_each` | `2 * n` (mask block, then magnitude block) |
//!
//! All floating-point math goes through `libm`, so Gaussian draws are
//! bit-identical on every target.

use alloc::vec::Vec;

use crate::error::{invalid, Result};

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const GAMMA_INV: u64 = 0xF1DE_83E1_9937_733D;

#[inline(always)]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent 32-bit stream seed from a master seed and a stream id.
pub fn derive_seed(master: u32, stream: u32) -> u32 {
    let key = ((master as u64) << 32) | stream as u64;
    (mix64(key.wrapping_add(GAMMA)) >> 32) as u32
}

/// Probability of zeroing a coordinate, held as a 32-bit fixed-point threshold.
///
/// A mask word keeps its coordinate iff its upper 32 bits are `>= threshold`,
/// so `P(keep) = 1 - threshold / 2^32`. Sampling therefore needs no floats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroProb {
    threshold: u64,
}

impl ZeroProb {
    pub const NEVER: ZeroProb = ZeroProb { threshold: 0 };
    pub const ALWAYS: ZeroProb = ZeroProb { threshold: 1 << 32 };

    pub fn new(p_zero: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_zero) {
            return Err(invalid("p_zero", alloc::format!("{p_zero} is outside [0, 1]")));
        }
        let threshold = libm::round(p_zero * 4_294_967_296.0) as u64;
        Ok(ZeroProb { threshold })
    }

    /// `numerator / denominator`, computed without floating point.
    pub fn from_ratio(numerator: u64, denominator: u64) -> Result<Self> {
        if denominator == 0 || numerator > denominator {
            return Err(invalid("p_zero", "ratio must lie in [0, 1]"));
        }
        let threshold = ((numerator as u128) << 32) / denominator as u128;
        Ok(ZeroProb { threshold: threshold as u64 })
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    pub fn as_f64(&self) -> f64 {
        self.threshold as f64 / 4_294_967_296.0
    }

    #[inline(always)]
    fn keeps(&self, word: u64) -> bool {
        (word >> 32) >= self.threshold
    }
}

/// A deterministic generator that can be re-created from its seed at any time.
///
/// Single-owner: move it between threads if needed, never share it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeededGenerator {
    state: u64,
    seed: u32,
}

impl SeededGenerator {
    pub fn new(seed: u32) -> Self {
        SeededGenerator { state: seed as u64, seed }
    }

    pub fn seed(&self) -> u32 {
        self.seed
    }

    /// Number of raw words drawn since seeding.
    pub fn words_consumed(&self) -> u64 {
        self.state.wrapping_sub(self.seed as u64).wrapping_mul(GAMMA_INV)
    }

    #[inline(always)]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    #[inline(always)]
    pub fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    /// Advances the stream by `words` without producing output.
    pub fn skip(&mut self, words: u64) {
        self.state = self.state.wrapping_add(GAMMA.wrapping_mul(words));
    }

    /// Uniform integer in `0..bound` via multiply-high (bias below `bound / 2^64`).
    pub fn next_below(&mut self, bound: u64) -> u64 {
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    /// Uniform `f32` in `[lo, hi)` from the top 24 bits of one word.
    pub fn next_uniform_f32(&mut self, lo: f32, hi: f32) -> f32 {
        let u = (self.next_u64() >> 40) as f32 * (1.0 / 16_777_216.0);
        lo + (hi - lo) * u
    }

    /// One Box-Muller pair from two words.
    #[inline(always)]
    pub fn next_gaussian_pair(&mut self) -> (f32, f32) {
        let w1 = self.next_u64();
        let w2 = self.next_u64();
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = ((w1 >> 40) + 1) as f32 * (1.0 / 16_777_216.0);
        let u2 = (w2 >> 40) as f32 * (1.0 / 16_777_216.0);
        let radius = libm::sqrtf(-2.0 * libm::logf(u1));
        let (s, c) = libm::sincosf(core::f32::consts::TAU * u2);
        (radius * c, radius * s)
    }

    /// Calls `f(i, z_i)` for `n` standard-normal draws, consuming `2 * ceil(n/2)` words.
    #[inline]
    pub fn gaussian_for_each(&mut self, n: usize, mut f: impl FnMut(usize, f32)) {
        let mut i = 0;
        while i + 1 < n {
            let (a, b) = self.next_gaussian_pair();
            f(i, a);
            f(i + 1, b);
            i += 2;
        }
        if i < n {
            let (a, _) = self.next_gaussian_pair();
            f(i, a);
        }
    }

    pub fn gaussian_vector(&mut self, n: usize) -> Vec<f32> {
        let mut out = alloc::vec![0.0; n];
        self.gaussian_for_each(n, |i, z| out[i] = z);
        out
    }

    /// `n` integers uniform on `{-r_max, ..., r_max}`, one word each.
    pub fn uniform_int8_vector(&mut self, n: usize, r_max: u8) -> Result<Vec<i8>> {
        check_r_max(r_max)?;
        let buckets = 2 * r_max as u64 + 1;
        Ok((0..n)
            .map(|_| ((self.next_u64() % buckets) as i64 - r_max as i64) as i8)
            .collect())
    }

    /// `n` mask entries, each 1 with probability `1 - p_zero`, one word each.
    pub fn bernoulli_mask(&mut self, n: usize, p_zero: ZeroProb) -> Vec<u8> {
        (0..n).map(|_| p_zero.keeps(self.next_u64()) as u8).collect()
    }

    /// Streams `z_i = m_i * u_i` for one layer without materialising `m` or `u`.
    ///
    /// Produces exactly what `bernoulli_mask(n)` followed by
    /// `uniform_int8_vector(n)` would, and leaves the generator in the same
    /// state (`2n` words consumed).
    #[inline]
    pub fn sparse_int8_for_each(
        &mut self,
        n: usize,
        r_max: u8,
        p_zero: ZeroProb,
        mut f: impl FnMut(usize, i8),
    ) -> Result<()> {
        check_r_max(r_max)?;
        let buckets = 2 * r_max as u64 + 1;
        let mut mask = self.clone();
        let mut magnitude = self.clone();
        magnitude.skip(n as u64);
        for i in 0..n {
            let keep = p_zero.keeps(mask.next_u64());
            let u = ((magnitude.next_u64() % buckets) as i64 - r_max as i64) as i8;
            f(i, if keep { u } else { 0 });
        }
        self.skip(2 * n as u64);
        Ok(())
    }
}

fn check_r_max(r_max: u8) -> Result<()> {
    if r_max > 127 {
        return Err(invalid("r_max", alloc::format!("{r_max} exceeds 127")));
    }
    Ok(())
}
