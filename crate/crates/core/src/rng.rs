//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream whose 64-bit seed is
//! derived from a parent seed and a tag with SplitMix64 mixing. Deriving the
//! same `(seed, tag)` pair always yields the same stream on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags used for instance fields.
pub mod tag {
    pub const MODE: u64 = 1;
    pub const DIM: u64 = 2;
    pub const BOUNDS: u64 = 3;
    pub const FES: u64 = 4;
    pub const COMPONENTS: u64 = 5;
    pub const WEIGHTS: u64 = 6;
    pub const SEGMENTS: u64 = 7;
    pub const SHIFT: u64 = 8;
    pub const ROTATION: u64 = 9;
    pub const INSTANCE: u64 = 10;
    pub const SPLIT: u64 = 11;
    pub const ELA: u64 = 12;
    pub const RANDOM_SEARCH: u64 = 13;
    pub const ENGINE: u64 = 14;
    pub const CONTROLLER: u64 = 15;
    pub const WORKFLOW: u64 = 16;
    pub const PARAMS: u64 = 17;
    pub const FUNCTION: u64 = 18;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `tag` under `seed`.
pub fn derive(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(tag.wrapping_mul(0xD6E8_FEB8_6659_FD93)))
}

/// Child seed along a path of tags.
pub fn derive_path(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |s, &t| derive(s, t))
}

pub fn stream(seed: u64, tag: u64) -> Rng {
    Rng::seed_from_u64(derive(seed, tag))
}

pub fn from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
