//! Seed derivation: one root seed fans out to independent, reproducible
//! streams (split, init, noise, attack, ...) and per-sample substreams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; the fixed 64-bit mixer used for all stream
/// derivation so samples are reproducible and parallelizable.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Mix a stream seed with a sample index into a substream seed.
pub fn mix(seed: u64, sample_index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(sample_index))
}

/// Derive a named stream seed from a root seed. Stable across runs and
/// platforms (FNV-1a over the tag bytes, mixed with the root).
pub fn derive_seed(root: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xCBF29CE484222325;
    for &b in tag.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001B3);
    }
    mix(root, h)
}

/// RNG for a (seed, sample_index) substream.
pub fn substream(seed: u64, sample_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, sample_index))
}
