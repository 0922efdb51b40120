//! Per-repetition random streams.
//!
//! Every work unit gets its own ChaCha8 stream keyed by the master seed, so a
//! repetition draws the same numbers regardless of which thread runs it or in
//! what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Recorded in run manifests.
pub const RNG_ALGORITHM: &str =
    "ChaCha8Rng (rand_chacha 0.9): seed_from_u64(master_seed), set_stream((beta_idx << 48) | (sigma_idx << 32) | rep)";

pub fn stream_id(beta_idx: usize, sigma_idx: usize, rep: usize) -> u64 {
    debug_assert!(beta_idx < 1 << 16 && sigma_idx < 1 << 16 && rep < 1 << 32);
    ((beta_idx as u64) << 48) | ((sigma_idx as u64) << 32) | rep as u64
}

pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// RNG for repetition `rep` of grid cell `(beta_idx, sigma_idx)`.
pub fn rep_rng(master_seed: u64, beta_idx: usize, sigma_idx: usize, rep: usize) -> ChaCha8Rng {
    stream_rng(master_seed, stream_id(beta_idx, sigma_idx, rep))
}
