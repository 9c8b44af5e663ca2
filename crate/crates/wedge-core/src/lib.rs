//! Low-rank tensor completion via wedge sampling.
//!
//! A wedge is a length-two path `i -> l -> j` in the bipartite sampling graph
//! of a matrix unfolding: rows on the left, columns on the right. Sampling a
//! wedge reveals the two entries `A[i,l]` and `A[j,l]` at once, which feeds a
//! debiased Gram estimator whose expectation is `A Aᵀ`. The top eigenvectors
//! of that estimator recover the left singular subspace of the unfolding at
//! budgets where uniform entry sampling produces too few row correlations.
//!
//! The crate is organised around that pipeline:
//!
//! - [`tensor`]: dense tensors, CP models, unfoldings, mode products, norms
//!   and incoherence diagnostics;
//! - [`sampling`]: wedge and uniform index sampling, the wedge matrix `Z`,
//!   debiased observations;
//! - [`spectral`]: top-r eigenpairs, Procrustes alignment, subspace errors;
//! - [`completion`]: spectral completion (symmetric and mode-wise asymmetric);
//! - [`gd`]: CP-factor retrieval and gradient descent on the sampled
//!   least-squares objective (order-3 symmetric tensors);
//! - [`delta_norm`]: lower-bound estimation of the delta-incoherent spectral
//!   norm and sparse-deviation concentration probes;
//! - [`harness`]: seeded experiment sweeps, wedge-vs-uniform comparisons,
//!   CSV/manifest/plot emission;
//! - [`io`]: binary tensor/matrix formats and sample-set serialization.
//!
//! All randomness flows through [`rng`]: ChaCha8 streams derived from a
//! master seed with SplitMix64 label folding, so every result is reproducible
//! from `(config, seed)` alone.

pub mod completion;
pub mod delta_norm;
pub mod error;
pub mod gd;
pub mod harness;
pub mod io;
pub mod rng;
pub mod sampling;
pub mod spectral;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
