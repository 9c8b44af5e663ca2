//! Reproducible random streams.
//!
//! Every random decision in the crate draws from a ChaCha8 stream whose seed
//! is derived from `(master_seed, labels...)` by folding the labels through
//! SplitMix64. Streams for distinct label paths are independent for all
//! practical purposes, and a stream depends only on its own labels, so trials
//! can run in any order (or in parallel) without changing results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function (Steele, Lea & Flood 2014).
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a label path.
///
/// Each label is absorbed with a SplitMix64 round, so
/// `derive_seed(s, &[a, b])` differs from `derive_seed(s, &[b, a])`.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    let mut acc = splitmix64(master);
    for &l in labels {
        acc = splitmix64(acc ^ splitmix64(l));
    }
    acc
}

/// A ChaCha8 stream for the given label path under the master seed.
pub fn stream(master: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, labels))
}

/// Labels for the top-level stream roles, kept in one place so the
/// derivations are stable across the crate.
pub mod label {
    /// Wedge index sampling (sub-label: mode).
    pub const WEDGE: u64 = 1;
    /// Uniform observation sampling.
    pub const UNIFORM: u64 = 2;
    /// Ground-truth model generation.
    pub const MODEL: u64 = 3;
    /// Retrieval probe vectors (sub-label: probe index).
    pub const PROBE: u64 = 4;
    /// Evaluation-subset sampling.
    pub const EVAL: u64 = 5;
    /// Delta-norm estimator restarts.
    pub const DELTA: u64 = 6;
}
