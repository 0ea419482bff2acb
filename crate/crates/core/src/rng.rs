//! Seed derivation.
//!
//! Every stochastic routine takes an explicit `u64` seed. Child seeds are
//! derived with [`split`], which runs the SplitMix64 finalizer over
//! `parent ^ (stream * GOLDEN)`. Rollout `i` of a dataset with master seed
//! `s` uses `split(s, i)`; plan `k` of a trial with seed `t` uses
//! `split(t, k)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn split(parent: u64, stream: u64) -> u64 {
    let mut z = parent ^ stream.wrapping_add(1).wrapping_mul(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
