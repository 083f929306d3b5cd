//! Counter-based randomness.
//!
//! Subsampling and window draws are keyed by `(seed, position)` instead of a
//! sequential generator, so results do not depend on how the corpus is split
//! across workers.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a stream tag.
#[inline]
pub fn derive(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag))
}

/// 64 random bits for `position` under `seed`.
#[inline]
pub fn bits_at(seed: u64, position: u64) -> u64 {
    mix64(mix64(seed).wrapping_add(position.wrapping_mul(GOLDEN)))
}

/// Uniform draw in [0, 1) with 53 bits of precision.
#[inline]
pub fn unit_at(seed: u64, position: u64) -> f64 {
    (bits_at(seed, position) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in `1..=max` (max ≥ 1).
#[inline]
pub fn range_at(seed: u64, position: u64, max: u32) -> u32 {
    debug_assert!(max >= 1);
    // Lemire's multiply-shift; bias is < 2^-32 for the small ranges used here.
    let r = bits_at(seed, position) >> 32;
    ((r * max as u64) >> 32) as u32 + 1
}

pub(crate) mod tags {
    pub const SUBSAMPLE: u64 = 1;
    pub const WINDOW: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const INIT: u64 = 4;
    pub const MAPPING: u64 = 5;
    pub const SAMPLE: u64 = 6;
}
