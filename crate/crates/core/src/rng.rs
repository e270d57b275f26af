//! Seeding policy shared by every randomized routine in the crate.
//!
//! One master seed plus a stream id fully determine a generator. Replicated
//! experiments assign each replication its own stream, so serial and parallel
//! runs (any worker count) consume identical randomness per replication.
//!
//! Stream id layout:
//! - `STREAM_PRIMARY` (0): the main sequence of a generator call.
//! - `STREAM_PRIMED` (1): the independent innovation stream used for coupled
//!   copies.
//! - `STREAM_TARGET` (2): the fixed target point of an experiment.
//! - `STREAM_AUX` (3): large auxiliary samples (e.g. plug-in small-ball
//!   estimates).
//! - `STREAM_VERIFY` (4): validation draws (e.g. Lipschitz spot checks).
//! - `STREAM_REPLICATION_BASE` (16) and above: per-replication streams. Rate
//!   experiments additionally shift a per-`n` block into the high 32 bits.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub const STREAM_PRIMARY: u64 = 0;
pub const STREAM_PRIMED: u64 = 1;
pub const STREAM_TARGET: u64 = 2;
pub const STREAM_AUX: u64 = 3;
pub const STREAM_VERIFY: u64 = 4;
pub const STREAM_REPLICATION_BASE: u64 = 16;

/// Deterministic generator for (seed, stream) pairs.
///
/// Distinct stream ids on the same seed yield independent ChaCha streams.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Stream id for replication `rep` inside block `block` (0 = the base block).
///
/// Blocks separate replication families that must not share randomness, e.g.
/// one block per sample size in a rate experiment.
pub fn replication_stream_id(block: u64, rep: u64) -> u64 {
    (block << 32) | (STREAM_REPLICATION_BASE + rep)
}
