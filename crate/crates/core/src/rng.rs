//! Seed derivation. Every random stream in the crate comes from a root seed
//! and a stream counter, so a run is reproducible from its seed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for `stream` under `seed`. Streams are independent ChaCha
/// streams of the same key.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a child seed from `seed` and a counter (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, counter: u64) -> u64 {
    let mut z = seed ^ counter.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Named streams used by the trainer and data pipeline.
pub mod streams {
    pub const DATA: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const CORRUPT: u64 = 3;
    pub const INIT: u64 = 4;
    pub const BATCHES: u64 = 5;
    pub const PAIRS: u64 = 6;
}
