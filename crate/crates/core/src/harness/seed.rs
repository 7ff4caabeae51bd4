//! Deterministic seed derivation.
//!
//! `mix(master, i)` adds `(i + 1) * 0x9E3779B97F4A7C15` to `master` (wrapping) and
//! applies the 64-bit SplitMix finalizer:
//!
//! ```text
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z =  z ^ (z >> 31)
//! ```
//!
//! Trial `i` of an experiment uses `trial_seed = mix(master, i)`. Within a trial,
//! each random stream is seeded with `mix(trial_seed, stream)` and drives a
//! ChaCha8 generator (`rand_chacha::ChaCha8Rng::seed_from_u64`).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Index used with the master seed for the one-off teacher pre-training run.
pub const PRETRAIN_INDEX: u64 = 0xFFFF_FFFF;

/// Independent random streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Environment dynamics and the student's exploration during training.
    Train = 0,
    /// Environment dynamics during greedy evaluation episodes.
    Eval = 1,
    /// The random teacher's suggestions.
    Teacher = 2,
}

pub fn mix(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seed(master: u64, trial: usize) -> u64 {
    mix(master, trial as u64)
}

pub fn stream_seed(trial_seed: u64, stream: Stream) -> u64 {
    mix(trial_seed, stream as u64)
}

pub fn stream_rng(trial_seed: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(trial_seed, stream))
}
