//! Deterministic keyed RNG substreams.
//!
//! Every random decision in the crate draws from a stream keyed by a master
//! seed plus the integer coordinates of the decision (chain, step, pair,
//! trial, ...). Results are therefore independent of scheduling: parallel
//! and sequential executions of the same seed are bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Collapse a master seed and a word tuple into one well-mixed 64-bit key.
///
/// Absorption is order-sensitive, so `(a, b)` and `(b, a)` key different
/// streams.
pub fn derive_seed(master: u64, words: &[u64]) -> u64 {
    let mut h = mix(master);
    for &w in words {
        h = mix(h ^ mix(w));
    }
    h
}

/// A ChaCha8 stream keyed by `(master, words...)`.
pub fn substream(master: u64, words: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, words))
}
