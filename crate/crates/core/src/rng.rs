//! Seed derivation. Every stochastic routine takes a top-level seed and derives
//! independent streams from `(seed, tags...)`, so serial and parallel execution
//! draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type AuditRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a seed with a sequence of tags into a new 64-bit seed.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t.wrapping_add(0x632B_E59B_D9B4_E019))))
}

/// Independent generator for the stream identified by `tags`.
pub fn stream(seed: u64, tags: &[u64]) -> AuditRng {
    AuditRng::seed_from_u64(derive_seed(seed, tags))
}
