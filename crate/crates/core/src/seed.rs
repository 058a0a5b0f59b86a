//! Counter-based seed derivation.
//!
//! Every random draw in a campaign comes from a fresh generator seeded by
//! `(master seed, purpose, iteration, index)`. Nothing random is carried
//! between iterations, so a checkpoint only needs the master seed and the
//! iteration counter, and evaluation order cannot change results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a derived stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Sampling = 1,
    Split = 2,
    RecordChoice = 3,
    Impulse = 4,
    Batch = 5,
    ModelInit = 6,
    Evaluation = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(master: u64, purpose: Purpose, iteration: u64, index: u64) -> u64 {
    let mut h = splitmix64(master);
    h = splitmix64(h ^ (purpose as u64));
    h = splitmix64(h ^ iteration);
    splitmix64(h ^ index)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(master: u64, purpose: Purpose, iteration: u64, index: u64) -> ChaCha8Rng {
    rng(derive(master, purpose, iteration, index))
}
