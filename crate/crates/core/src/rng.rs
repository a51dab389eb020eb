//! Seed derivation. Every random artifact is produced from a ChaCha8 stream
//! identified by a master seed and a stream index, so parallel work units
//! draw from independent, reproducible sequences regardless of scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Child seed for work unit `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    stream_rng(seed, index).next_u64()
}
