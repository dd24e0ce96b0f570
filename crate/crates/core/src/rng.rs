//! Per-concern random streams derived from one run seed.
//!
//! Each concern draws from its own ChaCha stream, so adding draws for one
//! purpose never shifts the sequence seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concern {
    Init = 1,
    Augment = 2,
    Reservoir = 3,
    Retrieval = 4,
    StreamOrder = 5,
    Synthetic = 6,
    Epochs = 7,
    Probe = 8,
}

pub fn rng_for(seed: u64, concern: Concern) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(concern as u64);
    rng
}
