// Licensed under the Apache-2.0 license

//! Seed derivation helpers. Every random stream in the simulator is a
//! ChaCha8 generator keyed from one of these derived seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep streams drawn for different purposes apart even when the
/// caller passes the same user seed.
pub(crate) mod domain {
    pub const PAIR_MAP: u64 = 0x5041_4952_4d41_5000;
    pub const DEVICE: u64 = 0x4445_5649_4345_0000;
    pub const NOISE: u64 = 0x4e4f_4953_4500_0000;
    pub const TRIAL: u64 = 0x5452_4941_4c00_0000;
    pub const POPULATION: u64 = 0x504f_5055_4c00_0000;
    pub const CHALLENGE: u64 = 0x4348_414c_0000_0000;
    pub const STUB: u64 = 0x5354_5542_0000_0000;
    pub const GARBAGE: u64 = 0x4741_5242_0000_0000;
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines two words into a well-mixed 64-bit seed.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(a) ^ b.rotate_left(17) ^ 0x2545_f491_4f6c_dd1d)
}

pub(crate) fn rng(domain: u64, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(domain, seed))
}
