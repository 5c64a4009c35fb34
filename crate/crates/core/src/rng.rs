//! Seeding helpers. All randomness in the crate flows from explicit `u64`
//! seeds through these functions; there is no global generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// One SplitMix64 output for state `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream `index` derived from `seed`. The seed is mixed before
/// the index is folded in; a bare `seed ^ index` would make small seeds share
/// their streams (seed 1's stream 0 is seed 0's stream 1).
pub fn stream(seed: u64, index: u64) -> Rng {
    Rng::seed_from_u64(splitmix64(splitmix64(seed) ^ index))
}

pub fn from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(splitmix64(seed))
}
