//! Named sub-seeds.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded through
//! [`derive`], so a single user-facing seed fans out into independent,
//! reproducible streams (`derive(seed, "mask", 3)` never collides with
//! `derive(seed, "nmf", 3)` in practice).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a sub-seed from a parent seed, a stream name and an index.
pub fn derive(seed: u64, name: &str, index: u64) -> u64 {
    // FNV-1a over the name keeps the mapping stable across platforms.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(splitmix64(seed ^ h).wrapping_add(index))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sub_rng(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    rng(derive(seed, name, index))
}
