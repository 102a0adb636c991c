//! Seeded random streams.
//!
//! Every trial owns one master seed. Independent consumers (start pose,
//! sampler, oracle noise, clustering) derive their own named stream so
//! adding draws in one place never shifts another.

use rand::SeedableRng;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

pub type Rng = Pcg64;

/// Name recorded in traces so a replay knows which generator produced them.
pub const GENERATOR: &str = "pcg64-xsl-rr-128/64 (rand_pcg 0.10), seed_from_u64";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngInfo {
    pub generator: String,
    pub seed: u64,
}

impl RngInfo {
    pub fn new(seed: u64) -> Self {
        Self { generator: GENERATOR.to_string(), seed }
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed for the stream `name` under master `seed`.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    splitmix64(splitmix64(seed) ^ fnv1a(name.as_bytes()))
}

pub fn stream(seed: u64, name: &str) -> Rng {
    Pcg64::seed_from_u64(derive_seed(seed, name))
}

/// Seed of trial `index` in a suite started from `base`.
pub fn trial_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index.wrapping_add(1)))
}
