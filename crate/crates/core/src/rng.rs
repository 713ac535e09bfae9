//! Deterministic random number generation.
//!
//! All stochastic code in this crate draws from ChaCha12 generators seeded
//! through this module, so every run is reproducible from a single `u64`
//! seed. Independent windows get independent substreams derived by mixing
//! `(seed, index)` through SplitMix64, which keeps per-window sampling
//! order-independent under parallel execution.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The generator used throughout the crate.
pub type Rng = ChaCha12Rng;

/// Master generator for a run.
pub fn master(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Independent substream `index` of `seed`.
///
/// Substreams with different indices are statistically independent of each
/// other and of the master stream.
pub fn substream(seed: u64, index: u64) -> Rng {
    Rng::seed_from_u64(mix(seed, index))
}

// SplitMix64 finalizer over the concatenated inputs.
fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
