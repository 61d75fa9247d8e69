//! Seeded random streams keyed by stable identifiers.
//!
//! A stream depends only on `(seed, key)`, never on iteration order, so work
//! over documents can be reordered or parallelized without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 64-bit FNV-1a; stable across platforms and releases.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream for `key` under `seed`.
pub fn keyed(seed: u64, key: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stable_hash(key.as_bytes()));
    rng
}

/// Rounds a non-negative `ratio * n` half away from zero.
pub fn scaled_count(ratio: f64, n: usize) -> usize {
    let x = ratio * n as f64 + 0.5;
    (x as usize).min(n)
}
