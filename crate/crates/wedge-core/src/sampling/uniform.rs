//! Uniform entry sampling and debiased observations.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::tensor::{ColumnIndexMap, DenseTensor, TensorEntry, UnfoldedMatrix};

/// A uniformly sampled set of tensor multi-indices, stored as sorted
/// row-major encoded u64 indices (no duplicates).
#[derive(Debug, Clone)]
pub struct ObservationSet {
    shape: Vec<usize>,
    q: f64,
    seed: u64,
    encoded: Vec<u64>,
}

impl ObservationSet {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rate(&self) -> f64 {
        self.q
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.encoded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoded.is_empty()
    }

    pub fn encoded(&self) -> &[u64] {
        &self.encoded
    }

    /// Decode one encoded index into a multi-index.
    pub fn decode(&self, id: u64, index: &mut [usize]) {
        let mut rem = id;
        for (slot, &d) in index.iter_mut().zip(&self.shape).rev() {
            *slot = (rem % d as u64) as usize;
            rem /= d as u64;
        }
    }

    /// Iterate multi-indices in sorted encoded order.
    pub fn iter_indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        self.encoded.iter().map(move |&id| {
            let mut idx = vec![0usize; self.shape.len()];
            self.decode(id, &mut idx);
            idx
        })
    }

    pub(crate) fn from_encoded(
        shape: &[usize],
        q: f64,
        seed: u64,
        encoded: Vec<u64>,
    ) -> Result<Self> {
        let total: u128 = shape.iter().map(|&d| d as u128).product();
        let mut prev: Option<u64> = None;
        for &id in &encoded {
            if (id as u128) >= total {
                return Err(Error::InvalidArgument(format!("encoded index {} out of range", id)));
            }
            if prev.map_or(false, |p| p >= id) {
                return Err(Error::InvalidArgument("observation indices not sorted/distinct".into()));
            }
            prev = Some(id);
        }
        Ok(ObservationSet { shape: shape.to_vec(), q, seed, encoded })
    }
}

/// Include every multi-index of `shape` independently with probability `q`
/// (binomial count plus distinct uniform draws, which is the same
/// distribution). Deterministic given `seed`.
pub fn sample_uniform(shape: &[usize], q: f64, seed: u64) -> Result<ObservationSet> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidRate { rate: q });
    }
    if shape.is_empty() || shape.iter().any(|&d| d == 0) {
        return Err(Error::ShapeMismatch(format!("invalid shape {:?}", shape)));
    }
    let total_wide: u128 = shape.iter().map(|&d| d as u128).product();
    if total_wide > u64::MAX as u128 {
        return Err(Error::IndexOverflow { total: total_wide });
    }
    let total = total_wide as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = if q >= 1.0 {
        total
    } else {
        Binomial::new(total, q)
            .map_err(|e| Error::InvalidArgument(format!("binomial: {e}")))?
            .sample(&mut rng)
    };
    let encoded = super::sample_distinct_sorted(total, count, &mut rng);
    Ok(ObservationSet { shape: shape.to_vec(), q, seed, encoded })
}

/// Debiased mode-j unfolding `Y = q^{-1} unfold_j(P_Omega(T))`: entries off
/// the observation set are zero, and `E[Y] = unfold_j(T)`.
pub fn debiased_unfolding(
    t: &(impl TensorEntry + ?Sized),
    obs: &ObservationSet,
    mode: usize,
) -> Result<UnfoldedMatrix> {
    if t.shape() != obs.shape() {
        return Err(Error::ShapeMismatch(format!(
            "tensor {:?} vs observation shape {:?}",
            t.shape(),
            obs.shape()
        )));
    }
    let map = ColumnIndexMap::new(t.shape(), mode)?;
    let rows = t.shape()[mode];
    let cols_wide = map.num_cols();
    if (rows as u128) * (cols_wide as u128) > crate::tensor::DENSE_CAP_DEFAULT as u128 {
        return Err(Error::DenseCapExceeded {
            requested: rows as u128 * cols_wide as u128,
            cap: crate::tensor::DENSE_CAP_DEFAULT,
        });
    }
    let mut m = nalgebra::DMatrix::<f64>::zeros(rows, cols_wide as usize);
    let inv_q = 1.0 / obs.rate();
    let mut idx = vec![0usize; t.shape().len()];
    for &id in obs.encoded() {
        obs.decode(id, &mut idx);
        let col = map.col_of(&idx);
        m[(idx[mode], col as usize)] = inv_q * t.entry(&idx);
    }
    Ok(UnfoldedMatrix { mode, tensor_shape: t.shape().to_vec(), matrix: m })
}

/// Debiased dense tensor `q^{-1} P_Omega(T)`.
pub fn debiased_dense(t: &(impl TensorEntry + ?Sized), obs: &ObservationSet) -> Result<DenseTensor> {
    if t.shape() != obs.shape() {
        return Err(Error::ShapeMismatch(format!(
            "tensor {:?} vs observation shape {:?}",
            t.shape(),
            obs.shape()
        )));
    }
    let mut out = DenseTensor::zeros(t.shape())?;
    let inv_q = 1.0 / obs.rate();
    let mut idx = vec![0usize; t.shape().len()];
    for &id in obs.encoded() {
        obs.decode(id, &mut idx);
        let v = inv_q * t.entry(&idx);
        out.set(&idx, v)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{unfold_dense, CpModel};

    #[test]
    fn full_rate_includes_everything() {
        let obs = sample_uniform(&[2, 3, 2], 1.0, 4).unwrap();
        assert_eq!(obs.len(), 12);
    }

    #[test]
    fn inclusion_frequency_matches_rate() {
        // shape (2,2,2), q=0.5: index (0,0,0) appears in [0.48, 0.52] of
        // 10000 seeds.
        let mut hits = 0usize;
        let seeds = 10_000;
        for seed in 0..seeds {
            let obs = sample_uniform(&[2, 2, 2], 0.5, seed).unwrap();
            if obs.encoded().binary_search(&0).is_ok() {
                hits += 1;
            }
        }
        let freq = hits as f64 / seeds as f64;
        assert!((0.48..=0.52).contains(&freq), "frequency {}", freq);
    }

    #[test]
    fn determinism_contract() {
        let a = sample_uniform(&[5, 5, 5], 0.2, 9).unwrap();
        let b = sample_uniform(&[5, 5, 5], 0.2, 9).unwrap();
        assert_eq!(a.encoded(), b.encoded());
        let c = sample_uniform(&[5, 5, 5], 0.2, 10).unwrap();
        assert_ne!(a.encoded(), c.encoded());
    }

    #[test]
    fn rejects_bad_rate() {
        assert!(sample_uniform(&[2, 2], 0.0, 0).is_err());
        assert!(sample_uniform(&[2, 2], 1.5, 0).is_err());
    }

    #[test]
    fn debiased_unfolding_at_full_rate_is_unfolding() {
        let model = CpModel::random_gaussian(&[3, 4, 2], 2, 8).unwrap();
        let dense = model.to_dense().unwrap();
        let obs = sample_uniform(dense.shape(), 1.0, 0).unwrap();
        for mode in 0..3 {
            let y = debiased_unfolding(&dense, &obs, mode).unwrap();
            let direct = unfold_dense(&dense, mode).unwrap();
            assert!((&y.matrix - &direct.matrix).abs().max() <= 1e-12);
        }
    }

    #[test]
    fn debiased_unfolding_mean_converges() {
        // Mean of Y over 1000 seeds at q=0.1 within Monte-Carlo error.
        let model = CpModel::random_gaussian(&[4, 3, 3], 1, 3).unwrap();
        let dense = model.to_dense().unwrap();
        let truth = unfold_dense(&dense, 0).unwrap().matrix;
        let seeds = 1000;
        let mut mean = nalgebra::DMatrix::<f64>::zeros(truth.nrows(), truth.ncols());
        for seed in 0..seeds {
            let obs = sample_uniform(dense.shape(), 0.1, seed).unwrap();
            mean += debiased_unfolding(&dense, &obs, 0).unwrap().matrix;
        }
        mean /= seeds as f64;
        // Per-entry sd of Y is <= |T|/q * sqrt(q) ~ |T|*sqrt(1/q); with 1000
        // seeds the band is generous.
        let band = 5.0 * dense.max_abs() * (1.0 / 0.1f64).sqrt() / (seeds as f64).sqrt();
        assert!((&mean - &truth).abs().max() <= band);
    }

    #[test]
    fn empty_observations_give_zero_matrix() {
        let model = CpModel::random_gaussian(&[3, 3, 3], 1, 1).unwrap();
        let dense = model.to_dense().unwrap();
        let obs = ObservationSet::from_encoded(dense.shape(), 0.5, 0, vec![]).unwrap();
        let y = debiased_unfolding(&dense, &obs, 1).unwrap();
        assert!(y.matrix.iter().all(|&v| v == 0.0));
    }
}
