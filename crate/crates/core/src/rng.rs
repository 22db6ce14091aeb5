//! Counter-based random streams.
//!
//! Every consumer of randomness gets its own ChaCha stream addressed by
//! `(seed, purpose, id)`, so the draws of one client never depend on how
//! many draws another client made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream purposes used by the simulator.
pub mod purpose {
    pub const INIT: u32 = 0;
    pub const CLIENT_DATA: u32 = 1;
    pub const CLIENT_DELAY: u32 = 2;
    pub const ATTACK: u32 = 3;
    pub const COLLUSION: u32 = 4;
    pub const PARTITION: u32 = 5;
    pub const SYNTHETIC: u32 = 6;
}

/// Independent stream for `(seed, purpose, id)`.
pub fn stream(seed: u64, purpose: u32, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 40) ^ id);
    rng
}
