//! Counter-based random streams.
//!
//! Every random draw in a run is keyed by `(seed, purpose, index)`. The
//! simulator uses the completion counter as the index, so the order in which
//! events are processed never shifts the numbers a later proposal sees.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha12Rng;

/// What a stream is used for. Each purpose maps onto its own ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Purpose {
    Init,
    Fantasies,
    Thompson,
    Durations,
    AcqRestarts,
    HyperRestarts,
    /// Free-form streams for tests and tools.
    Custom(u16),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Init => 1,
            Purpose::Fantasies => 2,
            Purpose::Thompson => 3,
            Purpose::Durations => 4,
            Purpose::AcqRestarts => 5,
            Purpose::HyperRestarts => 6,
            Purpose::Custom(c) => 0x100 + c as u64,
        }
    }
}

/// A reproducible family of generators for one `(seed, purpose)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub purpose: Purpose,
}

impl RngStream {
    pub fn new(seed: u64, purpose: Purpose) -> Self {
        Self { seed, purpose }
    }

    /// Generator for draw `index` of this stream.
    pub fn at(&self, index: u64) -> StreamRng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        // 20 bits of purpose, 44 bits of index.
        rng.set_stream((self.purpose.tag() << 44) ^ (index & ((1 << 44) - 1)));
        rng
    }
}

/// All streams of one run, addressed by purpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Streams {
    pub seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn stream(&self, purpose: Purpose) -> RngStream {
        RngStream::new(self.seed, purpose)
    }

    pub fn rng(&self, purpose: Purpose, index: u64) -> StreamRng {
        self.stream(purpose).at(index)
    }
}
