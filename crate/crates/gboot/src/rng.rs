//! Deterministic seed derivation for parallel work.
//!
//! Every unit of randomized work (a bootstrap replicate, a simulated dataset,
//! a method run) owns a [`SeedStream`] derived from its parent's stream and a
//! fixed index. Because a child seed depends only on `(parent seed, index)`,
//! results are reproducible under any evaluation order or thread count.
//!
//! The mixing function is fixed as part of the output contract:
//! `child(parent, i) = splitmix64(parent XOR splitmix64(i + 0x9E3779B97F4A7C15))`,
//! where `splitmix64` is the finalizer of the SplitMix64 generator.

use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

/// SplitMix64 finalizer: a bijective 64-bit mix with good avalanche.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A node in the deterministic seed tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream(u64);

impl SeedStream {
    pub fn new(master_seed: u64) -> Self {
        SeedStream(master_seed)
    }

    /// Child stream for a fixed index; children of one node never collide.
    pub fn child(&self, index: u64) -> SeedStream {
        SeedStream(splitmix64(self.0 ^ splitmix64(index)))
    }

    pub fn seed(&self) -> u64 {
        self.0
    }

    /// Instantiates the RNG for this stream.
    pub fn rng(&self) -> Pcg64Mcg {
        Pcg64Mcg::seed_from_u64(self.0)
    }
}
