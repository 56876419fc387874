//! Seeding contract for every stochastic routine.
//!
//! A run is identified by `(master_seed, run_index)`. Each run owns one
//! ChaCha8 generator: the master seed picks the key and the run index picks
//! the stream, so runs are independent and can execute in any order.
//!
//! Within a period the draws happen in this order:
//! 1. agents in index order: action draw, side draw (two-group only), price draw;
//! 2. one shuffle for market 1, then one for market 2.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

/// Generator for run `run_index` under `master_seed`.
pub fn run_stream(master_seed: u64, run_index: u64) -> RunRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run_index);
    rng
}
