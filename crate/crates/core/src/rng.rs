//! Reproducible random streams.
//!
//! Every random quantity is drawn from a ChaCha8 generator seeded with
//! `seed` and positioned on stream `stream_id`. ChaCha8 output is defined
//! bit-for-bit independently of platform and word size, so a published
//! `(seed, stream_id)` pair reproduces results everywhere. Independent
//! sub-tasks (replications, splits, samplers) derive their own streams with
//! [`RngState::substream`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState { seed, stream_id: 0 }
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        RngState { seed, stream_id }
    }

    /// A child stream, deterministic in `(self, index)`.
    pub fn substream(&self, index: u64) -> RngState {
        let mixed = splitmix64(splitmix64(self.stream_id) ^ index.wrapping_add(0x632b_e59b_d9b4_e019));
        RngState {
            seed: self.seed,
            stream_id: mixed,
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
