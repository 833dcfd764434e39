//! Counter-based random substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream selected by
//! `(seed, path_id, role)`. Paths never share a stream, so serial and
//! parallel runs produce bit-identical numbers and any single path can be
//! regenerated on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    /// Signal noise (`W` under P, `W̃` under Q and Q̃).
    SignalNoise = 0,
    /// Observation noise (`B` under P and Q, `Y` itself under Q̃).
    ObservationNoise = 1,
    /// Particle mutation and resampling inside a filter.
    Particles = 2,
    /// Randomized probes and test directions.
    Probe = 3,
}

const ROLES: u64 = 8;

/// Addresses one substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub path_id: u64,
    pub role: Role,
}

impl StreamKey {
    pub fn new(seed: u64, path_id: u64, role: Role) -> Self {
        Self { seed, path_id, role }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.path_id.wrapping_mul(ROLES).wrapping_add(self.role as u64));
        rng
    }
}
