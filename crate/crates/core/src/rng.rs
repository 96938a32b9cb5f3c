//! Deterministic random streams.
//!
//! Every stochastic quantity in an experiment is drawn from a stream derived
//! from `(master seed, seed index, tag)` with a splitmix64 mix, so adding or
//! removing one consumer never shifts the draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// One round of the splitmix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a hash of a tag, stable across platforms and releases.
pub fn tag_hash(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Derives a child seed from a parent seed and a sequence of words.
pub fn derive(parent: u64, words: &[u64]) -> u64 {
    words
        .iter()
        .fold(splitmix64(parent), |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

/// Generator for `(master, index, tag)`.
pub fn stream(master: u64, index: u64, tag: &str) -> SimRng {
    SimRng::seed_from_u64(derive(master, &[index, tag_hash(tag)]))
}

/// Generator seeded directly from a single value.
pub fn from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
