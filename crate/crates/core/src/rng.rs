//! Seeding.
//!
//! All randomness flows from a [`Seed`] through ChaCha20, a counter-based
//! generator with a 64-bit block counter and a 64-bit stream selector. Child
//! seeds for restarts and replicates are obtained by selecting a stream, so a
//! given `(seed, index)` pair reproduces the same draws on every platform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub type Rng = ChaCha20Rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

impl Seed {
    /// Generator on stream 0.
    pub fn rng(self) -> Rng {
        ChaCha20Rng::seed_from_u64(self.0)
    }

    /// Generator on an explicit stream.
    pub fn stream(self, stream: u64) -> Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.0);
        rng.set_stream(stream);
        rng
    }

    /// Child seed for the `index`-th independent unit of work.
    pub fn derive(self, index: u64) -> Seed {
        // Stream 0 is reserved for direct use of the parent.
        Seed(self.stream(index.wrapping_add(1)).next_u64())
    }
}

impl From<u64> for Seed {
    fn from(x: u64) -> Self {
        Seed(x)
    }
}
