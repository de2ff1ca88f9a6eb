//! Seeded randomness.
//!
//! Every random draw in the crate goes through [`MazeRng`], which is
//! ChaCha8 from `rand_chacha` 0.9 seeded with `SeedableRng::seed_from_u64`.
//! ChaCha is a counter-based generator with a platform-independent stream,
//! so a `(config, seed)` pair reproduces the same layout and episode on any
//! machine. Changing the generator changes every dataset; bump
//! [`crate::trajstore::FORMAT_VERSION`] if that ever happens.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type MazeRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> MazeRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed for item `index` of stream `stream` under a
/// master seed. Used for per-trajectory, per-lane and per-episode seeds.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    mix64(mix64(mix64(master) ^ stream.wrapping_mul(0xA24B_AED4_963E_E407)) ^ index)
}
