//! Seed splitting.
//!
//! Every stochastic routine takes one 64-bit seed. Replicate `i` of a sweep
//! draws from `ChaCha8Rng::seed_from_u64(derive_seed(seed, i))`, where
//! `derive_seed` is the SplitMix64 output function applied to
//! `seed + (i + 1) * 0x9E3779B97F4A7C15` (wrapping). Results therefore do not
//! depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for replicate `index`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, index))
}
