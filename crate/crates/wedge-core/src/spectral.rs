//! Top-r eigendecomposition of the wedge matrix, Procrustes alignment, and
//! subspace error metrics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tensor::operator_norm_of;

/// Eigenvalue ordering used to pick the leading subspace.
///
/// `Signed` (the default) matches picking the "highest" eigenvalues of a
/// matrix that approximates the PSD Gram `A Aᵀ`; `Absolute` is available for
/// robustness experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigOrdering {
    #[default]
    Signed,
    Absolute,
}

/// Orthonormal basis of the estimated leading eigenspace with its
/// eigenvalues.
#[derive(Debug, Clone)]
pub struct SubspaceEstimate {
    /// `n x r`, orthonormal columns, eigenvalue-sorted.
    pub basis: DMatrix<f64>,
    /// Eigenvalues in the chosen order (descending).
    pub eigenvalues: Vec<f64>,
    /// Set when the spectral gap at the cut is degenerate
    /// (|lambda_r - lambda_{r+1}| below 1e-12 relative to |lambda_1|);
    /// the subspace is still returned.
    pub degenerate_gap: bool,
    pub ordering: EigOrdering,
}

/// Leading `r` eigenvectors of a symmetric matrix.
///
/// Eigenpairs sort by signed eigenvalue descending by default. Each
/// eigenvector's sign is fixed by making its largest-magnitude entry positive
/// (lowest index wins ties) so CSV output is reproducible; alignment metrics
/// are sign-invariant regardless. A full symmetric eigendecomposition is used
/// (intended for n up to a couple thousand).
pub fn top_r_eigs(z: &DMatrix<f64>, r: usize, ordering: EigOrdering) -> Result<SubspaceEstimate> {
    let n = z.nrows();
    if z.ncols() != n {
        return Err(Error::ShapeMismatch(format!("matrix is {}x{}", n, z.ncols())));
    }
    if r == 0 || r > n {
        return Err(Error::InvalidArgument(format!("rank {} out of range for n={}", r, n)));
    }
    let max_abs = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let asym = (z - z.transpose()).abs().max();
    if asym > 1e-10 * max_abs.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidArgument(format!(
            "matrix is not symmetric (asymmetry {asym:e})"
        )));
    }
    let eig = z.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    match ordering {
        EigOrdering::Signed => {
            order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap())
        }
        EigOrdering::Absolute => order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .abs()
                .partial_cmp(&eig.eigenvalues[a].abs())
                .unwrap()
        }),
    }
    let mut basis = DMatrix::<f64>::zeros(n, r);
    let mut eigenvalues = Vec::with_capacity(r);
    for (c, &src) in order.iter().take(r).enumerate() {
        let mut col: DVector<f64> = eig.eigenvectors.column(src).into();
        // Sign convention: largest-|entry| coordinate positive, ties by
        // lowest index.
        let mut pivot = 0usize;
        let mut best = -1.0f64;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        basis.set_column(c, &col);
        eigenvalues.push(eig.eigenvalues[order[c]]);
    }
    let degenerate_gap = if r < n {
        let lam_r = match ordering {
            EigOrdering::Signed => eig.eigenvalues[order[r - 1]],
            EigOrdering::Absolute => eig.eigenvalues[order[r - 1]].abs(),
        };
        let lam_next = match ordering {
            EigOrdering::Signed => eig.eigenvalues[order[r]],
            EigOrdering::Absolute => eig.eigenvalues[order[r]].abs(),
        };
        let scale = eig.eigenvalues[order[0]].abs().max(f64::MIN_POSITIVE);
        (lam_r - lam_next).abs() <= 1e-12 * scale
    } else {
        false
    };
    Ok(SubspaceEstimate { basis, eigenvalues, degenerate_gap, ordering })
}

/// Procrustes alignment of two orthonormal bases.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    /// `H = Ûᵀ U`.
    pub h: DMatrix<f64>,
    /// The optimal rotation `R = sgn(H) = U_H V_Hᵀ`, minimizing
    /// `||Û O - U||_F` over orthogonal `O`.
    pub rotation: DMatrix<f64>,
    /// Principal angles, ascending.
    pub principal_angles: Vec<f64>,
    /// `||Û R - U||` (operator norm).
    pub op_err: f64,
    /// `||Û R - U||_F`.
    pub fro_err: f64,
    /// `||Û R - U||_{2,inf}` (max row norm).
    pub two_inf_err: f64,
    /// `||sin Theta||` = sine of the largest principal angle.
    pub sin_theta: f64,
    /// Flagged when `H` is numerically rank-deficient (orthogonal
    /// directions present); the rotation is still returned from the SVD
    /// factors.
    pub degenerate: bool,
}

fn check_orthonormal(name: &str, u: &DMatrix<f64>) -> Result<()> {
    let gram = u.transpose() * u;
    let dev = (&gram - DMatrix::<f64>::identity(gram.nrows(), gram.ncols()))
        .abs()
        .max();
    if dev > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "{} is not orthonormal (max deviation {:e})",
            name, dev
        )));
    }
    Ok(())
}

/// Align `u_hat` to `u` with the optimal rotation (sign matrix of
/// `H = Ûᵀ U`) and report the error metrics.
pub fn procrustes_align(u_hat: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<AlignmentResult> {
    if u_hat.shape() != u.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            u_hat.nrows(),
            u_hat.ncols(),
            u.nrows(),
            u.ncols()
        )));
    }
    check_orthonormal("u_hat", u_hat)?;
    check_orthonormal("u", u)?;
    let h = u_hat.transpose() * u;
    let svd = h.clone().svd(true, true);
    let uh = svd.u.as_ref().expect("U requested");
    let vht = svd.v_t.as_ref().expect("Vᵀ requested");
    let rotation = uh * vht;
    let degenerate = svd.singular_values.iter().any(|&s| s < 1e-12);
    let mut angles: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|&s| s.clamp(-1.0, 1.0).acos())
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let sin_theta = angles.last().map_or(0.0, |&t| t.sin());
    let diff = u_hat * &rotation - u;
    let op_err = crate::tensor::operator_norm(&diff);
    let fro_err = diff.norm();
    let two_inf_err = (0..diff.nrows()).map(|i| diff.row(i).norm()).fold(0.0, f64::max);
    Ok(AlignmentResult {
        h,
        rotation,
        principal_angles: angles,
        op_err,
        fro_err,
        two_inf_err,
        sin_theta,
        degenerate,
    })
}

/// Distance metrics between two orthonormal bases.
#[derive(Debug, Clone, Copy)]
pub struct SubspaceErrors {
    /// `||Û R - U||` after the optimal rotation.
    pub op_err: f64,
    /// `||Û R - U||_{2,inf}`.
    pub two_inf_err: f64,
    /// `||sin Theta||`.
    pub sin_theta: f64,
    /// `||Û Ûᵀ - U Uᵀ||`, evaluated directly from the projectors.
    pub projector_gap: f64,
}

/// Rotation-aligned subspace errors plus the projector gap.
///
/// The projector gap is computed independently (power iteration on the
/// squared projector difference, applied as rank-2r matvecs) so tests can
/// compare it against the principal-angle route; for orthonormal bases of
/// equal rank it coincides with `||sin Theta||`.
pub fn subspace_errors(u_hat: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<SubspaceErrors> {
    let align = procrustes_align(u_hat, u)?;
    let projector_gap = projector_gap(u_hat, u);
    Ok(SubspaceErrors {
        op_err: align.op_err,
        two_inf_err: align.two_inf_err,
        sin_theta: align.sin_theta,
        projector_gap,
    })
}

/// `||Û Ûᵀ - U Uᵀ||` without forming the n x n projectors: power iteration
/// on `D²` where `D w = Û(Ûᵀw) - U(Uᵀw)`.
pub fn projector_gap(u_hat: &DMatrix<f64>, u: &DMatrix<f64>) -> f64 {
    let n = u_hat.nrows();
    let apply_d = |v: &DVector<f64>| -> DVector<f64> {
        u_hat * (u_hat.transpose() * v) - u * (u.transpose() * v)
    };
    operator_norm_of(n, |v, out| {
        let dv = apply_d(v);
        out.copy_from(&apply_d(&dv));
    })
    .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormal_from(seed: u64, n: usize, r: usize) -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::zeros(n, r);
        let mut s = seed;
        for v in m.iter_mut() {
            s = crate::rng::splitmix64(s);
            *v = ((s >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
        }
        let qr = m.qr();
        qr.q()
    }

    #[test]
    fn diagonal_matrix_top_eigs() {
        let z = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let est = top_r_eigs(&z, 2, EigOrdering::Signed).unwrap();
        assert_eq!(est.eigenvalues, vec![3.0, 2.0]);
        assert!((est.basis[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((est.basis[(1, 1)] - 1.0).abs() < 1e-12);
        assert!(!est.degenerate_gap);
    }

    #[test]
    fn absolute_ordering_flag() {
        let z = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -3.0, 1.0]));
        let signed = top_r_eigs(&z, 1, EigOrdering::Signed).unwrap();
        assert_eq!(signed.eigenvalues[0], 2.0);
        let absolute = top_r_eigs(&z, 1, EigOrdering::Absolute).unwrap();
        assert_eq!(absolute.eigenvalues[0], -3.0);
    }

    #[test]
    fn eigen_residual_is_small() {
        let n = 40;
        let mut z = DMatrix::<f64>::zeros(n, n);
        let mut s = 3u64;
        for i in 0..n {
            for j in 0..=i {
                s = crate::rng::splitmix64(s);
                let v = ((s >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
                z[(i, j)] = v;
                z[(j, i)] = v;
            }
        }
        let r = 5;
        let est = top_r_eigs(&z, r, EigOrdering::Signed).unwrap();
        let lam = DMatrix::from_diagonal(&DVector::from_vec(est.eigenvalues.clone()));
        let residual = &z * &est.basis - &est.basis * lam;
        let z_norm = crate::tensor::operator_norm(&z);
        assert!(crate::tensor::operator_norm(&residual) <= 1e-8 * z_norm);
        // Orthonormality of the basis.
        let dev = (est.basis.transpose() * &est.basis - DMatrix::identity(r, r)).abs().max();
        assert!(dev <= 1e-10);
    }

    #[test]
    fn eigenvalues_match_characteristic_polynomial_roots() {
        // Random symmetric 3x3: compare against roots of det(Z - t I) found
        // by bisection between Gershgorin bounds.
        let z = DMatrix::from_row_slice(3, 3, &[
            0.7, -0.2, 0.4, //
            -0.2, 1.3, 0.1, //
            0.4, 0.1, -0.5,
        ]);
        let est = top_r_eigs(&z, 3, EigOrdering::Signed).unwrap();

        // char poly p(t) = -t^3 + c2 t^2 + c1 t + c0 evaluated directly.
        let charpoly = |t: f64| {
            let m = &z - DMatrix::<f64>::identity(3, 3) * t;
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        };
        let bound: f64 = 3.0;
        let mut roots = Vec::new();
        let grid = 20_000;
        let mut prev_t = -bound;
        let mut prev_v = charpoly(prev_t);
        for g in 1..=grid {
            let t = -bound + 2.0 * bound * g as f64 / grid as f64;
            let v = charpoly(t);
            if prev_v == 0.0 {
                roots.push(prev_t);
            } else if prev_v * v < 0.0 {
                let (mut lo, mut hi) = (prev_t, t);
                let (mut flo, _fhi) = (prev_v, v);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let fm = charpoly(mid);
                    if flo * fm <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            prev_t = t;
            prev_v = v;
        }
        assert_eq!(roots.len(), 3, "expected 3 simple roots");
        roots.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (got, want) in est.eigenvalues.iter().zip(&roots) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn rejects_nonsymmetric_and_bad_rank() {
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(top_r_eigs(&z, 1, EigOrdering::Signed).is_err());
        let sym = DMatrix::<f64>::identity(2, 2);
        assert!(top_r_eigs(&sym, 3, EigOrdering::Signed).is_err());
        assert!(top_r_eigs(&sym, 0, EigOrdering::Signed).is_err());
    }

    #[test]
    fn identical_bases_align_with_identity() {
        let u = orthonormal_from(5, 10, 3);
        let a = procrustes_align(&u, &u).unwrap();
        let dev = (&a.rotation - DMatrix::<f64>::identity(3, 3)).abs().max();
        assert!(dev < 1e-10);
        assert!(a.op_err < 1e-10 && a.two_inf_err < 1e-10 && a.sin_theta < 1e-7);
    }

    #[test]
    fn rotation_is_cancelled() {
        let u = orthonormal_from(6, 12, 2);
        // O: a rotation by 0.4 radians.
        let (c, s) = (0.4f64.cos(), 0.4f64.sin());
        let o = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let u_hat = &u * &o;
        let a = procrustes_align(&u_hat, &u).unwrap();
        let dev = (&a.rotation - o.transpose()).abs().max();
        assert!(dev < 1e-10, "deviation {}", dev);
        assert!(a.op_err < 1e-10);
    }

    #[test]
    fn procrustes_beats_grid_over_o2() {
        // For r = 2, the returned rotation must beat 10^4 grid rotations and
        // reflections in Frobenius error.
        let u = orthonormal_from(7, 9, 2);
        let u_hat = orthonormal_from(8, 9, 2);
        let a = procrustes_align(&u_hat, &u).unwrap();
        let best = a.fro_err;
        let grid = 10_000;
        for g in 0..grid {
            let th = 2.0 * std::f64::consts::PI * g as f64 / grid as f64;
            let (c, s) = (th.cos(), th.sin());
            for refl in [false, true] {
                let o = if refl {
                    DMatrix::from_row_slice(2, 2, &[c, s, s, -c])
                } else {
                    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
                };
                let err = (&u_hat * &o - &u).norm();
                assert!(
                    best <= err + 1e-9,
                    "grid rotation beat Procrustes: {} < {}",
                    err,
                    best
                );
            }
        }
    }

    #[test]
    fn orthogonal_lines_have_unit_errors() {
        let mut u = DMatrix::<f64>::zeros(4, 1);
        u[(0, 0)] = 1.0;
        let mut v = DMatrix::<f64>::zeros(4, 1);
        v[(1, 0)] = 1.0;
        let e = subspace_errors(&v, &u).unwrap();
        assert!((e.sin_theta - 1.0).abs() < 1e-12);
        assert!((e.projector_gap - 1.0).abs() < 1e-9);
    }

    #[test]
    fn projector_gap_equals_sin_theta() {
        // Identity of the projector distance: ||ÛÛᵀ - UUᵀ|| = ||sin Theta||,
        // checked against a dense evaluation of both sides.
        for seed in 0..5u64 {
            let u = orthonormal_from(10 + seed, 11, 3);
            let u_hat = orthonormal_from(100 + seed, 11, 3);
            let e = subspace_errors(&u_hat, &u).unwrap();
            let dense_gap = {
                let d = &u_hat * u_hat.transpose() - &u * u.transpose();
                crate::tensor::operator_norm(&d)
            };
            assert!((e.projector_gap - dense_gap).abs() <= 1e-8);
            assert!((e.projector_gap - e.sin_theta).abs() <= 1e-8);
        }
    }

    #[test]
    fn sgn_matrix_inequalities_hold() {
        // ||H - sgn(H)|| <= ||sin||^2 and ||Û sgn(H) - U|| <= 2 ||sin||.
        for seed in 0..6u64 {
            let u = orthonormal_from(20 + seed, 13, 2);
            let u_hat = orthonormal_from(200 + seed, 13, 2);
            let a = procrustes_align(&u_hat, &u).unwrap();
            let h_dev = crate::tensor::operator_norm(&(&a.h - &a.rotation));
            assert!(h_dev <= a.sin_theta * a.sin_theta + 1e-8);
            assert!(a.op_err <= 2.0 * a.sin_theta + 1e-8);
        }
    }
}
