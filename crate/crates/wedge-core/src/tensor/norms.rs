//! Matrix norms used throughout the crate.

use nalgebra::{DMatrix, DVector};

/// Relative tolerance for the iterative operator-norm estimate.
pub const OPERATOR_NORM_TOL: f64 = 1e-12;

const OPERATOR_NORM_MAX_ITERS: usize = 10_000;

/// The norm bundle reported by [`matrix_norms`].
///
/// `two_inf` is the maximum row l2 norm, `inf_two` the maximum column l2
/// norm; `operator` is the spectral norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixNorms {
    pub frobenius: f64,
    pub operator: f64,
    pub max_abs: f64,
    pub two_inf: f64,
    pub inf_two: f64,
}

/// Compute all norms of a dense matrix. An empty matrix returns zeros.
pub fn matrix_norms(m: &DMatrix<f64>) -> MatrixNorms {
    if m.nrows() == 0 || m.ncols() == 0 {
        return MatrixNorms { frobenius: 0.0, operator: 0.0, max_abs: 0.0, two_inf: 0.0, inf_two: 0.0 };
    }
    let frobenius = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let max_abs = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let two_inf = (0..m.nrows())
        .map(|i| m.row(i).norm())
        .fold(0.0f64, f64::max);
    let inf_two = (0..m.ncols())
        .map(|j| m.column(j).norm())
        .fold(0.0f64, f64::max);
    let operator = operator_norm(m);
    MatrixNorms { frobenius, operator, max_abs, two_inf, inf_two }
}

/// Spectral norm by power iteration on the Gram operator of the smaller
/// side, run to relative tolerance [`OPERATOR_NORM_TOL`].
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.ncols() <= m.nrows() {
        // v -> Aᵀ(A v) on R^ncols.
        operator_norm_of(m.ncols(), |v, out| {
            let av = m * &*v;
            out.copy_from(&(m.transpose() * av));
        })
        .sqrt()
    } else {
        operator_norm_of(m.nrows(), |v, out| {
            let atv = m.transpose() * &*v;
            out.copy_from(&(m * atv));
        })
        .sqrt()
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite operator given as
/// a matvec closure, by power iteration with a fixed deterministic start.
///
/// Callers wanting the spectral norm of a symmetric indefinite operator `D`
/// should pass `v -> D(D v)` and take the square root, which is also how
/// rectangular norms are reduced here.
pub fn operator_norm_of(dim: usize, mut apply: impl FnMut(&DVector<f64>, &mut DVector<f64>)) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    // Deterministic pseudo-random start vector; a fixed pattern avoids the
    // measure-zero orthogonal-start stall without threading an RNG through.
    let mut v = DVector::<f64>::zeros(dim);
    let mut s = 0x9e3779b97f4a7c15u64 ^ (dim as u64);
    for x in v.iter_mut() {
        s = crate::rng::splitmix64(s);
        *x = ((s >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
    }
    let norm = v.norm();
    if norm == 0.0 {
        return 0.0;
    }
    v /= norm;
    let mut w = DVector::<f64>::zeros(dim);
    let mut lambda = 0.0f64;
    for _ in 0..OPERATOR_NORM_MAX_ITERS {
        apply(&v, &mut w);
        let new_lambda = v.dot(&w).max(0.0);
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        v.copy_from(&w);
        v /= wn;
        if (new_lambda - lambda).abs() <= OPERATOR_NORM_TOL * new_lambda.max(f64::MIN_POSITIVE) {
            return new_lambda;
        }
        lambda = new_lambda;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_norms() {
        let n = 7;
        let id = DMatrix::<f64>::identity(n, n);
        let norms = matrix_norms(&id);
        assert!((norms.frobenius - (n as f64).sqrt()).abs() < 1e-12);
        assert!((norms.operator - 1.0).abs() < 1e-9);
        assert!((norms.two_inf - 1.0).abs() < 1e-12);
        assert!((norms.inf_two - 1.0).abs() < 1e-12);
        assert_eq!(norms.max_abs, 1.0);
    }

    #[test]
    fn rank_one_operator_norm_is_product_of_lengths() {
        let u = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let v = DVector::from_vec(vec![0.5, 4.0]);
        let m = &u * v.transpose();
        let norms = matrix_norms(&m);
        let expected = u.norm() * v.norm();
        assert!((norms.operator - expected).abs() <= 1e-9 * expected);
    }

    #[test]
    fn empty_matrix_returns_zeros() {
        let m = DMatrix::<f64>::zeros(0, 0);
        let norms = matrix_norms(&m);
        assert_eq!(norms.operator, 0.0);
        assert_eq!(norms.frobenius, 0.0);
    }

    #[test]
    fn operator_norm_matches_svd_on_random_matrices() {
        let mut s = 5u64;
        for trial in 0..5 {
            let (r, c) = (4 + trial, 3 + 2 * trial);
            let mut m = DMatrix::<f64>::zeros(r, c);
            for v in m.iter_mut() {
                s = crate::rng::splitmix64(s);
                *v = ((s >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
            }
            let svd = m.clone().svd(false, false);
            let sigma1 = svd.singular_values[0];
            assert!((operator_norm(&m) - sigma1).abs() <= 1e-8 * sigma1);
        }
    }

    #[test]
    fn symmetric_indefinite_norm_via_squared_operator() {
        // D = diag(0.8, -0.8, 0.3): spectral norm 0.8 even though +-0.8 tie.
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![0.8, -0.8, 0.3]));
        let norm = operator_norm_of(3, |v, out| {
            let dv = &d * v;
            out.copy_from(&(&d * dv));
        })
        .sqrt();
        assert!((norm - 0.8).abs() < 1e-9);
    }
}
