//! Seeded random number generation.
//!
//! All randomness in the crate flows through [`Rng`], a thin wrapper over
//! PCG64-MCG (`rand_pcg::Pcg64Mcg`, 128-bit multiplicative congruential state
//! with the XSL-RR output permutation). The algorithm is fixed so that a seed
//! identifies the same stream on every platform.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_pcg::Pcg64Mcg;

/// Name and version of the generator, echoed in run manifests.
pub const RNG_ALGORITHM: &str = "pcg64mcg-v1";

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: Pcg64Mcg,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: Pcg64Mcg::seed_from_u64(seed),
        }
    }

    /// Independent stream for a sub-task (a shard, a run index, a component).
    pub fn derive(seed: u64, stream: u64) -> Self {
        Rng::new(splitmix(seed ^ splitmix(stream.wrapping_add(0x9e37_79b9_7f4a_7c15))))
    }

    pub fn fork(&mut self, stream: u64) -> Self {
        let base = self.next_u64();
        Rng::derive(base, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in [0, n). `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Index drawn proportionally to `weights` (nonnegative, not all zero).
    pub fn weighted_index(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut target = self.uniform() * total;
        for (i, w) in weights.iter().enumerate() {
            if target < *w {
                return i;
            }
            target -= w;
        }
        // Rounding can leave `target` marginally past the last bucket.
        weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
