//! Seed handling.
//!
//! Every random stream is a ChaCha8 generator. Experiments carry one master
//! seed; sub-tasks derive child seeds with [`child_seed`], which runs the
//! master through SplitMix64 at an offset given by the task index. The
//! mapping is fixed, so a config seed reproduces every stream it spawns.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// One SplitMix64 output step.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed number `index` of `master`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
