//! Seeded random streams.
//!
//! Every consumer of randomness derives its own ChaCha stream from a base
//! seed plus a small tuple of stream coordinates, so results never depend on
//! the order in which independent streams are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a base seed with stream coordinates into a single 64-bit seed.
pub fn derive_seed(seed: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(splitmix64(seed), |acc, &c| splitmix64(acc.rotate_left(17) ^ splitmix64(c)))
}

pub fn stream(seed: u64, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, coords))
}

/// Stream domains, kept distinct so e.g. the dataset generator and the
/// partitioner never share a stream for the same user seed.
pub(crate) mod domain {
    pub const SYNTHETIC: u64 = 1;
    pub const PARTITION: u64 = 2;
    pub const MINIBATCH: u64 = 3;
    pub const INIT: u64 = 4;
    pub const SMOOTHNESS: u64 = 5;
    pub const DIVERGENCE: u64 = 6;
}
