//! Pinned pseudo-randomness for sampling decisions.
//!
//! Every random choice in this crate (tamper placement, validator segment
//! assignments, test-case generation) flows through [`SplitMix64`] so that
//! results are identical across platforms, builds, and execution orders.
//! Library RNGs are deliberately avoided: their streams may change between
//! versions, which would silently break recorded experiments.

use serde::{Deserialize, Serialize};

/// SplitMix64: a 64-bit counter-based generator with full-avalanche output
/// mixing. Tiny state, passes standard statistical batteries, and the
/// constants below are fixed forever.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform value in `0..bound`. `bound` must be nonzero.
    ///
    /// Plain modulo reduction: the bounds used here are tiny (segment
    /// counts), so the bias is on the order of `bound / 2^64` and far below
    /// anything the statistical suites can resolve.
    #[inline]
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        self.next_u64() % bound
    }

    /// Uniform float in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Derives a stream seed from an ordered tuple of parts.
///
/// The part count is folded in first, so tuples of different arity can
/// never collide even when one is a prefix of the other. Each part is
/// absorbed through the full avalanche mix.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut acc = mix64(parts.len() as u64 ^ GOLDEN_GAMMA);
    for &p in parts {
        acc = mix64(acc.wrapping_add(GOLDEN_GAMMA) ^ p);
    }
    acc
}

/// Uniform `r`-subset of `0..k` by partial Fisher-Yates, returned sorted.
///
/// Deterministic in `seed`; requires `1 <= r <= k`.
pub fn sample_subset(k: usize, r: usize, seed: u64) -> Vec<usize> {
    debug_assert!(r >= 1 && r <= k);
    let mut rng = SplitMix64::new(seed);
    let mut pool: Vec<usize> = (0..k).collect();
    for i in 0..r {
        let j = i + rng.next_below((k - i) as u64) as usize;
        pool.swap(i, j);
    }
    let mut chosen: Vec<usize> = pool[..r].to_vec();
    chosen.sort_unstable();
    chosen
}
