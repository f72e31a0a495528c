//! Seeded random streams. Each episode owns independent substreams so the
//! environment and the policy never share randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Arrivals = 1,
    Outcomes = 2,
    Policy = 3,
    Generator = 4,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    substream(seed, which as u64)
}

pub fn substream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
