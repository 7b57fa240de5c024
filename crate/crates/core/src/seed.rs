//! Seed derivation for reproducible parallel runs.
//!
//! Every independent unit of work (a Monte Carlo iteration, a sweep point)
//! draws from its own generator seeded with
//!
//! ```text
//! seed_k = splitmix64(root + (k + 1) * 0x9E3779B97F4A7C15)
//! ```
//!
//! i.e. the `k`-th output of a SplitMix64 stream started at `root`. Work items
//! can therefore run in any order or on any thread and still see the same
//! random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `k`-th work item under `root`.
#[inline]
pub fn derive_seed(root: u64, k: u64) -> u64 {
    splitmix64(root.wrapping_add(k.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Generator used for all simulation randomness.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
