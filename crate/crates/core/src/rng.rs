//! Seed-stream derivation.
//!
//! Every run draws all of its randomness from one root seed, split into
//! independently seeded named substreams (`"split"`, `"attack"`, `"init"`,
//! `"dropout"`). Components can therefore be reseeded or skipped without
//! shifting the draws of the others.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Derives the `u64` seed of a named substream from the root seed.
pub fn stream_seed(root: u64, name: &str) -> u64 {
    splitmix64(root ^ fnv1a64(name.as_bytes()))
}

/// A seeded generator for the named substream of `root`.
pub fn stream(root: u64, name: &str) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(stream_seed(root, name))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
