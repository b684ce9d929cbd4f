//! Deterministic derivation of independent seed streams from a run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the named sub-stream `stream` of `seed`.
pub fn derive(seed: u64, stream: u64) -> u64 {
    mix(mix(seed) ^ stream.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, stream))
}

/// Stream labels used across the crate.
pub mod streams {
    pub const SUB_POLICY_INIT: u64 = 0x100;
    pub const VALUE_INIT: u64 = 0x200;
    pub const ACTIONS: u64 = 0x300;
    pub const LAYOUTS: u64 = 0x400;
    pub const MINIBATCH: u64 = 0x500;
    pub const EVAL_LAYOUTS: u64 = 0x600;
    pub const EVAL_ACTIONS: u64 = 0x700;
    pub const LEARNER: u64 = 0x10_000;
}
