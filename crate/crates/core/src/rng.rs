//! Seeded randomness shared by the generators.
//!
//! Every image draws from its own PCG64 stream seeded with `master_seed ^ image_index`,
//! so images can be generated in any order (or in parallel) with identical output.

use rand::SeedableRng;
use rand_pcg::Pcg64;

/// Seed for image `index` of a dataset generated from `master_seed`.
pub fn image_seed(master_seed: u64, index: u64) -> u64 {
    master_seed ^ index
}

/// The PCG64 (XSL-RR 128/64) stream for a seed.
pub fn stream(seed: u64) -> Pcg64 {
    Pcg64::seed_from_u64(seed)
}

/// SplitMix64 finalizer. Used for stateless per-pixel and per-cell hashing.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of a seed and two coordinates.
pub fn hash2(seed: u64, a: i64, b: i64) -> u64 {
    splitmix64(seed ^ splitmix64((a as u64) ^ splitmix64(b as u64).rotate_left(17)))
}
