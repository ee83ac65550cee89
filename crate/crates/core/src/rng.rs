//! Seed derivation for independent per-component random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::archive::fnv1a64;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream label; stable across platforms and releases.
pub fn derive_seed(seed: u64, stream: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a64(stream.as_bytes())))
}

pub fn stream_rng(seed: u64, stream: &str) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, stream))
}

/// Uniform `[0, 1)` value from a hash, for deterministic per-key jitter.
pub fn unit_from_hash(h: u64) -> f64 {
    (splitmix64(h) >> 11) as f64 / (1u64 << 53) as f64
}
