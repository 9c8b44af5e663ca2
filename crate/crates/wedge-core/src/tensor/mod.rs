//! Dense and lazy tensor representations, CP models, unfoldings, mode
//! products, norms, and incoherence diagnostics.
//!
//! Modes are 0-based throughout the crate. Dense storage is row-major with
//! the first index slowest; unfolding columns enumerate the remaining modes
//! with the smallest remaining mode varying fastest (see [`unfold`]).

mod cp;
mod dense;
mod incoherence;
mod norms;
mod unfold;

pub use cp::CpModel;
pub use dense::{DenseTensor, DENSE_CAP_DEFAULT};
pub use incoherence::{
    cp_incoherence, incoherence_of_matrix, incoherence_report, IncoherenceReport,
    MatrixIncoherence, ModeIncoherence, RANK_TOL_DEFAULT,
};
pub use norms::{matrix_norms, operator_norm, operator_norm_of, MatrixNorms, OPERATOR_NORM_TOL};
pub use unfold::{fold, unfold_cp, unfold_dense, ColumnIndexMap, UnfoldedMatrix};

/// Read-only access to tensor entries by multi-index.
///
/// Implemented by both [`DenseTensor`] and [`CpModel`] so that sampling and
/// the completion/descent routines can work from either a materialized array
/// or a lazy CP evaluation, as dictated by the dense-materialization cap.
pub trait TensorEntry: Sync {
    fn shape(&self) -> &[usize];

    /// Entry at `index`; callers guarantee the index is within shape.
    fn entry(&self, index: &[usize]) -> f64;

    fn order(&self) -> usize {
        self.shape().len()
    }

    /// Total entry count, as u128 to survive large lazy shapes.
    fn num_entries(&self) -> u128 {
        self.shape().iter().map(|&d| d as u128).product()
    }
}

/// Read-only access to entries of a matrix (typically an unfolding).
pub trait MatrixEntry: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> u64;
    fn entry(&self, row: usize, col: u64) -> f64;
}
