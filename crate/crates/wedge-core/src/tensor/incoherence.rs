//! Incoherence diagnostics for matrices, unfoldings, and CP factors.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::{unfold_dense, CpModel, DenseTensor};

/// Default relative cutoff for numerical rank (relative to sigma_max).
pub const RANK_TOL_DEFAULT: f64 = 1e-10;

/// Minimal (mu1, mu2) incoherence parameters of a matrix at its numerical
/// rank.
#[derive(Debug, Clone, Copy)]
pub struct MatrixIncoherence {
    pub mu1: f64,
    pub mu2: f64,
    pub rank: usize,
}

/// Exact minimal incoherence parameters of `m`: with `U, V` the top-r
/// singular subspaces, `mu1 = (n/r) max_i ||U_i||^2` and
/// `mu2 = (m/r) max_j ||V_j||^2`, where r counts singular values above
/// `rank_tol * sigma_max` (ties at the cutoff included).
pub fn incoherence_of_matrix(m: &DMatrix<f64>, rank_tol: f64) -> Result<MatrixIncoherence> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::ZeroRank);
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix".into()));
    }
    let svd = m.clone().svd(true, true);
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0f64, f64::max);
    if sigma_max == 0.0 {
        return Err(Error::ZeroRank);
    }
    // Ties within one part in 1e-12 of the cutoff are included.
    let cutoff = rank_tol * sigma_max * (1.0 - 1e-12);
    let rank = sigma.iter().filter(|&&s| s >= cutoff).count().max(1);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let n = m.nrows() as f64;
    let mm = m.ncols() as f64;
    let u_row_max = (0..m.nrows())
        .map(|i| u.view((i, 0), (1, rank)).norm_squared())
        .fold(0.0f64, f64::max);
    let v_row_max = (0..m.ncols())
        .map(|j| v_t.view((0, j), (rank, 1)).norm_squared())
        .fold(0.0f64, f64::max);
    Ok(MatrixIncoherence {
        mu1: n / rank as f64 * u_row_max,
        mu2: mm / rank as f64 * v_row_max,
        rank,
    })
}

/// The smallest mu for which the CP-incoherence conditions hold with
/// equality: entrywise delocalization `n_j ||x||_inf^2 / ||x||^2 <= mu /
/// n_j`-style bounds and pairwise cross-correlation, maximized over factors
/// and modes.
pub fn cp_incoherence(model: &CpModel) -> Result<f64> {
    let r = model.rank();
    let mut mu = 0.0f64;
    for j in 0..model.order() {
        let f = model.factor(j);
        let n_j = f.nrows() as f64;
        let norms: Vec<f64> = (0..r).map(|i| f.column(i).norm()).collect();
        for (i, &norm) in norms.iter().enumerate() {
            if norm == 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "factor {} of mode {} is the zero vector",
                    i, j
                )));
            }
            let inf = f.column(i).amax();
            mu = mu.max(n_j * inf * inf / (norm * norm));
        }
        for i in 0..r {
            for i2 in (i + 1)..r {
                let dot = f.column(i).dot(&f.column(i2)).abs();
                mu = mu.max(n_j * dot / (norms[i] * norms[i2]));
            }
        }
    }
    Ok(mu)
}

/// Per-mode unfolding incoherence of one mode.
#[derive(Debug, Clone, Copy)]
pub struct ModeIncoherence {
    pub mode: usize,
    pub mu1: f64,
    pub mu2: f64,
    pub rank: usize,
}

/// Combined incoherence diagnostics for a CP model.
#[derive(Debug, Clone)]
pub struct IncoherenceReport {
    pub per_mode: Vec<ModeIncoherence>,
    pub cp_mu: f64,
    /// Whether `r * mu <= min_j n_j / 2` holds; the chained unfolding bounds
    /// (`mu1 <= 2 mu`, `mu2 <= 2 mu^(k-1)`) are only guaranteed under it.
    /// Violations are flagged, not rejected.
    pub bound_applicable: bool,
}

/// Compute CP-level and per-mode incoherence for a model small enough to
/// materialize.
pub fn incoherence_report(model: &CpModel, rank_tol: f64) -> Result<IncoherenceReport> {
    let cp_mu = cp_incoherence(model)?;
    let dense: DenseTensor = model.to_dense()?;
    let mut per_mode = Vec::with_capacity(model.order());
    for mode in 0..model.order() {
        let unf = unfold_dense(&dense, mode)?;
        let inc = incoherence_of_matrix(&unf.matrix, rank_tol)?;
        per_mode.push(ModeIncoherence { mode, mu1: inc.mu1, mu2: inc.mu2, rank: inc.rank });
    }
    let min_dim = *model.dims().iter().min().unwrap() as f64;
    let bound_applicable = model.rank() as f64 * cp_mu <= 0.5 * min_dim;
    Ok(IncoherenceReport { per_mode, cp_mu, bound_applicable })
}
