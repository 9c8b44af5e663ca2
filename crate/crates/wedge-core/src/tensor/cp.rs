//! CP (canonical polyadic) models: ground-truth generators and lazy entry
//! evaluation.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{DenseTensor, TensorEntry, DENSE_CAP_DEFAULT};

/// A rank-r CP model `T = sum_i x_i^(1) ⊗ ... ⊗ x_i^(k)`.
///
/// Factor matrices are `n_j x r` with columns `x_i^(j)`. When the model is
/// symmetric all modes share one factor matrix. Entry evaluation uses a fixed
/// summation order (rank index ascending, factors multiplied mode-ascending)
/// so lazy and materialized evaluation agree bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct CpModel {
    dims: Vec<usize>,
    rank: usize,
    symmetric: bool,
    /// One matrix if symmetric, else one per mode.
    factors: Vec<DMatrix<f64>>,
}

impl CpModel {
    /// Build a model from per-mode factor matrices (`n_j x r` each).
    pub fn new(factors: Vec<DMatrix<f64>>, symmetric: bool) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("no factor matrices".into()));
        }
        let rank = factors[0].ncols();
        if rank == 0 {
            return Err(Error::InvalidArgument("rank must be >= 1".into()));
        }
        let order = factors.len();
        if order < 2 {
            return Err(Error::InvalidArgument("order must be >= 2".into()));
        }
        let mut dims = Vec::with_capacity(order);
        for (j, f) in factors.iter().enumerate() {
            if f.ncols() != rank {
                return Err(Error::ShapeMismatch(format!(
                    "mode {} has {} columns, expected rank {}",
                    j,
                    f.ncols(),
                    rank
                )));
            }
            if f.nrows() == 0 {
                return Err(Error::ShapeMismatch(format!("mode {} has dimension 0", j)));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("factor matrix of mode {}", j)));
            }
            dims.push(f.nrows());
        }
        if symmetric {
            if dims.iter().any(|&d| d != dims[0]) {
                return Err(Error::ShapeMismatch(
                    "symmetric model requires equal dimensions".into(),
                ));
            }
            if factors.iter().any(|f| f != &factors[0]) {
                return Err(Error::InvalidArgument(
                    "symmetric model requires identical factor matrices".into(),
                ));
            }
            return Ok(CpModel { dims, rank, symmetric, factors: vec![factors[0].clone()] });
        }
        Ok(CpModel { dims, rank, symmetric, factors })
    }

    /// Symmetric model sharing one `n x r` factor matrix across `order` modes.
    pub fn new_symmetric(factor: DMatrix<f64>, order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidArgument("order must be >= 2".into()));
        }
        let n = factor.nrows();
        let rank = factor.ncols();
        if n == 0 || rank == 0 {
            return Err(Error::InvalidArgument("empty factor matrix".into()));
        }
        if factor.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("factor matrix".into()));
        }
        Ok(CpModel { dims: vec![n; order], rank, symmetric: true, factors: vec![factor] })
    }

    /// Symmetric model with i.i.d. Gaussian factor entries and unit-norm
    /// columns, the standard ground truth of the experiment sweeps.
    pub fn random_gaussian_symmetric(n: usize, rank: usize, order: usize, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, &[rng::label::MODEL]);
        let mut f = DMatrix::<f64>::zeros(n, rank);
        for c in 0..rank {
            let mut col = f.column_mut(c);
            let mut norm2 = 0.0;
            for v in col.iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *v = g;
                norm2 += g * g;
            }
            let norm = norm2.sqrt();
            if norm > 0.0 {
                for v in col.iter_mut() {
                    *v /= norm;
                }
            }
        }
        Self::new_symmetric(f, order)
    }

    /// Asymmetric model with independent Gaussian unit-norm columns per mode.
    pub fn random_gaussian(dims: &[usize], rank: usize, seed: u64) -> Result<Self> {
        let mut factors = Vec::with_capacity(dims.len());
        for (j, &n) in dims.iter().enumerate() {
            let mut rng = rng::stream(seed, &[rng::label::MODEL, j as u64]);
            let mut f = DMatrix::<f64>::zeros(n, rank);
            for c in 0..rank {
                let mut col = f.column_mut(c);
                let mut norm2 = 0.0;
                for v in col.iter_mut() {
                    let g: f64 = rng.sample(StandardNormal);
                    *v = g;
                    norm2 += g * g;
                }
                let norm = norm2.sqrt();
                if norm > 0.0 {
                    for v in col.iter_mut() {
                        *v /= norm;
                    }
                }
            }
            factors.push(f);
        }
        Self::new(factors, false)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Factor matrix of a mode (shared matrix when symmetric).
    pub fn factor(&self, mode: usize) -> &DMatrix<f64> {
        if self.symmetric {
            &self.factors[0]
        } else {
            &self.factors[mode]
        }
    }

    /// Rescale column `i` of every mode's factor by `s^(1/k)`, multiplying
    /// the CP weight lambda_i by `s`. Used to control kappa_CP.
    pub fn scale_weight(&mut self, i: usize, s: f64) -> Result<()> {
        if i >= self.rank {
            return Err(Error::InvalidArgument(format!("column {} out of range", i)));
        }
        if s <= 0.0 || !s.is_finite() {
            return Err(Error::InvalidArgument("scale must be positive".into()));
        }
        let per_mode = s.powf(1.0 / self.order() as f64);
        for f in &mut self.factors {
            for v in f.column_mut(i).iter_mut() {
                *v *= per_mode;
            }
        }
        Ok(())
    }

    /// CP weights lambda_i = prod_j ||x_i^(j)||; for a symmetric order-3
    /// model this is ||x_i||^3.
    pub fn cp_weights(&self) -> Vec<f64> {
        (0..self.rank)
            .map(|i| {
                (0..self.order())
                    .map(|j| self.factor(j).column(i).norm())
                    .product()
            })
            .collect()
    }

    /// kappa_CP = lambda_max / lambda_min.
    pub fn kappa_cp(&self) -> f64 {
        let w = self.cp_weights();
        let max = w.iter().cloned().fold(f64::MIN, f64::max);
        let min = w.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }

    /// Frobenius norm of the generated tensor, computed from the factors:
    /// ||T||_F^2 = sum_{i,i'} prod_j <x_i^(j), x_{i'}^(j)>.
    pub fn frobenius_norm(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.rank {
            for i2 in 0..self.rank {
                let mut prod = 1.0;
                for j in 0..self.order() {
                    let f = self.factor(j);
                    prod *= f.column(i).dot(&f.column(i2));
                }
                total += prod;
            }
        }
        total.max(0.0).sqrt()
    }

    /// Materialize the tensor, subject to the default dense cap.
    pub fn to_dense(&self) -> Result<DenseTensor> {
        self.to_dense_with_cap(DENSE_CAP_DEFAULT)
    }

    /// Materialize with an explicit cap. Summation order matches
    /// [`CpModel::entry`]: rank ascending, factors multiplied mode-ascending.
    pub fn to_dense_with_cap(&self, cap: usize) -> Result<DenseTensor> {
        let mut acc = DenseTensor::zeros_with_cap(&self.dims, cap)?;
        let mut term: Vec<f64> = Vec::new();
        let mut next: Vec<f64> = Vec::new();
        for i in 0..self.rank {
            // Expand the rank-1 term mode by mode; the partial product over
            // modes 0..j is stored row-major over (i_0, ..., i_j), so each
            // entry's factors multiply in mode-ascending order exactly as in
            // `entry`.
            term.clear();
            term.extend(self.factor(0).column(i).iter());
            for j in 1..self.order() {
                let col = self.factor(j).column(i);
                next.clear();
                next.reserve(term.len() * col.len());
                for &a in &term {
                    for &b in col.iter() {
                        next.push(a * b);
                    }
                }
                std::mem::swap(&mut term, &mut next);
            }
            for (o, &t) in acc.data_mut().iter_mut().zip(&term) {
                *o += t;
            }
        }
        Ok(acc)
    }

    /// Checked entry evaluation.
    pub fn entry_checked(&self, index: &[usize]) -> Result<f64> {
        if index.len() != self.dims.len()
            || index.iter().zip(&self.dims).any(|(&i, &d)| i >= d)
        {
            return Err(Error::IndexOutOfRange {
                index: index.to_vec(),
                shape: self.dims.clone(),
            });
        }
        Ok(self.entry(index))
    }
}

impl TensorEntry for CpModel {
    fn shape(&self) -> &[usize] {
        &self.dims
    }

    fn entry(&self, index: &[usize]) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.rank {
            let mut prod = self.factor(0)[(index[0], i)];
            for j in 1..self.order() {
                prod *= self.factor(j)[(index[j], i)];
            }
            sum += prod;
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spike_model() -> CpModel {
        // k=3, r=1, x = e_1 in R^2.
        let f = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        CpModel::new_symmetric(f, 3).unwrap()
    }

    #[test]
    fn spike_tensor_has_single_one() {
        let t = spike_model().to_dense().unwrap();
        assert_eq!(t.get(&[0, 0, 0]).unwrap(), 1.0);
        assert_eq!(t.data().iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn ones_factor_gives_all_ones_tensor() {
        let f = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let t = CpModel::new_symmetric(f, 3).unwrap().to_dense().unwrap();
        assert!(t.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn entry_matches_spike() {
        let m = spike_model();
        assert_eq!(m.entry_checked(&[0, 0, 0]).unwrap(), 1.0);
        assert_eq!(m.entry_checked(&[1, 0, 0]).unwrap(), 0.0);
        assert!(m.entry_checked(&[2, 0, 0]).is_err());
    }

    #[test]
    fn dense_matches_triple_loop_oracle() {
        // k=3, r=2, n=4 random Gaussian factors vs a direct triple-loop sum.
        let m = CpModel::random_gaussian_symmetric(4, 2, 3, 99).unwrap();
        let t = m.to_dense().unwrap();
        let f = m.factor(0);
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    let mut direct = 0.0;
                    for i in 0..2 {
                        direct += f[(a, i)] * f[(b, i)] * f[(c, i)];
                    }
                    let got = t.get(&[a, b, c]).unwrap();
                    assert!(
                        (got - direct).abs() <= 1e-12 * direct.abs().max(1e-300),
                        "mismatch at ({a},{b},{c}): {got} vs {direct}"
                    );
                }
            }
        }
    }

    #[test]
    fn entry_is_bit_identical_to_dense() {
        let m = CpModel::random_gaussian(&[3, 4, 5], 3, 1234).unwrap();
        let t = m.to_dense().unwrap();
        for a in 0..3 {
            for b in 0..4 {
                for c in 0..5 {
                    let idx = [a, b, c];
                    assert_eq!(m.entry(&idx), t.get(&idx).unwrap());
                }
            }
        }
    }

    #[test]
    fn random_entries_match_dense_at_100_points() {
        let m = CpModel::random_gaussian_symmetric(6, 2, 4, 7).unwrap();
        let t = m.to_dense().unwrap();
        let mut s = 7u64;
        for _ in 0..100 {
            let mut idx = [0usize; 4];
            for v in &mut idx {
                s = crate::rng::splitmix64(s);
                *v = (s % 6) as usize;
            }
            assert_eq!(m.entry(&idx), t.get(&idx).unwrap());
        }
    }

    #[test]
    fn symmetric_requires_equal_dims() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        assert!(CpModel::new(vec![a, b], true).is_err());
    }

    #[test]
    fn weights_and_kappa() {
        let f = DMatrix::from_column_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let m = CpModel::new_symmetric(f, 3).unwrap();
        let w = m.cp_weights();
        assert!((w[0] - 8.0).abs() < 1e-12);
        assert!((w[1] - 1.0).abs() < 1e-12);
        assert!((m.kappa_cp() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn factor_frobenius_formula_matches_dense() {
        let m = CpModel::random_gaussian_symmetric(5, 3, 3, 42).unwrap();
        let dense = m.to_dense().unwrap().frobenius_norm();
        assert!((m.frobenius_norm() - dense).abs() <= 1e-10 * dense);
    }
}
