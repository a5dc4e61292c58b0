//! Seed handling shared by every randomized step.
//!
//! All randomness flows from one master seed. Each replication gets its own
//! generator whose seed is a SplitMix64 hash of `(master, index)`, so
//! replications never share a generator and can run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator algorithm used throughout: ChaCha8, which has a fixed,
/// platform-independent output stream for a given seed.
pub type Generator = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeededRng {
    seed: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream for replication (or task) `index`.
    pub fn substream(&self, index: u64) -> SeededRng {
        SeededRng {
            seed: derive_seed(self.seed, index),
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn generator(&self) -> Generator {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// `sub-seed = splitmix64(master + golden * (index + 1))`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
    splitmix64(master.wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1))))
}

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
