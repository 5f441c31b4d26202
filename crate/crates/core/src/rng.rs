//! Reproducible random streams.
//!
//! Every random quantity is drawn from ChaCha20 (`rand_chacha::ChaCha20Rng`),
//! keyed by a 64-bit seed and a 64-bit stream id. The key is the seed
//! expanded through `SeedableRng::seed_from_u64`; the stream id selects one
//! of ChaCha's 2^64 independent nonces. Hierarchical seeds (per trial, per
//! block) are derived with [`derive_seed`], a SplitMix64 finalizer over the
//! parent seed and the child index, so results do not depend on the order in
//! which children are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Stream carrying small-scale channel coefficients.
pub const STREAM_CHANNEL: u64 = 0;
/// Stream carrying post-matched-filter beacon noise.
pub const STREAM_NOISE: u64 = 1;
/// Stream carrying random ER placements.
pub const STREAM_PLACEMENT: u64 = 2;

/// Builds the generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of child `index` under `parent`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}
