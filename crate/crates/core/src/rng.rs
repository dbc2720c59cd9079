//! Counter-keyed random streams.
//!
//! Every random quantity is drawn from a ChaCha20 stream selected by
//! `(seed, index, tag)`, so generation is reproducible no matter how trials
//! are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// What a stream is used for. Distinct tags give independent streams for
/// the same `(seed, index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamTag {
    LeftFactor = 0,
    RightFactor = 1,
    Measurement = 2,
    Noise = 3,
}

/// Opens the stream keyed by `(seed, index, tag)`. `index` must be below `2^56`.
pub fn stream(seed: u64, index: u64, tag: StreamTag) -> ChaCha20Rng {
    debug_assert!(index < 1 << 56);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((index << 8) | tag as u64);
    rng
}

/// Packs a grid position and trial number into a single stream index.
pub fn trial_index(point: usize, trial: usize) -> u64 {
    ((point as u64) << 28) | trial as u64
}
