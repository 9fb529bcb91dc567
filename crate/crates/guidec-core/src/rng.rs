//! Counter-based pseudo-random generator.
//!
//! Sampling must be bit-reproducible across platforms and schedulers, so we
//! use a splitmix-style counter generator instead of a stateful stream from
//! an external crate: the i-th output is a pure function of (seed, i), and
//! derived seeds (`seed + index`) give independent streams for parallel
//! episodes.

/// Weyl increment for the counter.
const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic counter-based generator.
#[derive(Clone, Debug)]
pub struct SplitRng {
    state: u64,
}

impl SplitRng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Seed for the `index`-th member of a batch rooted at `base`.
    #[inline]
    pub fn derive(base: u64, index: u64) -> u64 {
        base.wrapping_add(index)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform draw from 0..n.
    #[inline]
    pub fn next_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }
}
