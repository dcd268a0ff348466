//! Seeded random streams.
//!
//! Every run draws from three independent ChaCha8 streams: demand sizes and
//! delay classes, inter-arrival times, and policy tie-breaks. Traffic draws
//! never depend on decisions, so runs that share a traffic seed see the same
//! request trace whatever the policy or capacity scale.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Demand = 0,
    Arrivals = 1,
    Policy = 2,
}

pub fn stream(seed: u64, which: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub traffic: u64,
    pub policy: u64,
}

impl Seeds {
    pub fn new(traffic: u64, policy: u64) -> Self {
        Self { traffic, policy }
    }

    /// Replication `index` of an experiment uses `master + index` for both
    /// seeds; the streams are kept apart by stream id.
    pub fn for_replication(master: u64, index: u64) -> Self {
        let seed = master.wrapping_add(index);
        Self::new(seed, seed)
    }
}
