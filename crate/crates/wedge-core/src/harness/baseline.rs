//! Uniform-sampling baseline for subspace estimation.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::sampling::sample_uniform;
use crate::spectral::{top_r_eigs, EigOrdering, SubspaceEstimate};
use crate::tensor::MatrixEntry;

/// Left-subspace estimation from uniform entry samples of an unfolding: the
/// hollowed Gram matrix `B = Ã Ãᵀ - Diag(Ã Ãᵀ)` with `Ã = p⁻¹ P_Ω(A)`,
/// followed by its top-r eigenvectors. This is the natural uniform-sampling
/// analogue of the wedge estimator: off-diagonal entries of `B` collect the
/// wedges that happen to occur among the sampled entries.
///
/// Returns the estimate and the number of observed entries.
pub fn hollowed_gram_subspace(
    oracle: &(impl MatrixEntry + ?Sized),
    rate: f64,
    rank: usize,
    seed: u64,
    ordering: EigOrdering,
) -> Result<(SubspaceEstimate, u64)> {
    let n = oracle.nrows();
    let m = oracle.ncols();
    let obs = sample_uniform(&[n, m as usize], rate, seed)?;
    // Group observed (row, col) pairs by column to accumulate the Gram
    // products; ids are sorted row-major (row * m + col), so re-sort by col.
    let mut by_col: Vec<(u64, u32)> = obs
        .encoded()
        .iter()
        .map(|&id| (id % m, (id / m) as u32))
        .collect();
    by_col.sort_unstable();
    let inv_p = 1.0 / rate;
    let mut b = DMatrix::<f64>::zeros(n, n);
    let mut start = 0usize;
    while start < by_col.len() {
        let col = by_col[start].0;
        let mut end = start;
        while end < by_col.len() && by_col[end].0 == col {
            end += 1;
        }
        if end - start >= 2 {
            let group = &by_col[start..end];
            let values: Vec<(usize, f64)> = group
                .iter()
                .map(|&(_, row)| (row as usize, inv_p * oracle.entry(row as usize, col)))
                .collect();
            for (a, &(i, vi)) in values.iter().enumerate() {
                for &(j, vj) in values.iter().skip(a + 1) {
                    let prod = vi * vj;
                    b[(i, j)] += prod;
                    b[(j, i)] = b[(i, j)];
                }
            }
        }
        start = end;
    }
    let est = top_r_eigs(&b, rank.min(n), ordering)?;
    Ok((est, obs.len() as u64))
}
