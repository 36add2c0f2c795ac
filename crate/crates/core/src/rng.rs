//! Seeded random streams.
//!
//! Every random decision in a run is drawn from a ChaCha8 stream created here,
//! so a decomposition is a pure function of its inputs and seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `run_index`-th estimation: `mix64(seed + run_index)` with
/// wrapping addition.
pub fn run_seed(seed: u64, run_index: usize) -> u64 {
    mix64(seed.wrapping_add(run_index as u64))
}

pub fn rng_from_seed(seed: u64) -> RunRng {
    ChaCha8Rng::seed_from_u64(seed)
}
