//! Seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator. Child seeds are
//! derived from a parent seed and a stream index with the SplitMix64 finalizer,
//! so that independent stages (sampling, splitting, per-tree bootstraps, ...)
//! never share a stream while everything still follows from one user seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name recorded in dataset metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `hash(seed, index)`: child seed for the `index`-th sub-stream.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Child seed for a named pipeline stage (FNV-1a over the label).
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    derive_seed(seed, h)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
