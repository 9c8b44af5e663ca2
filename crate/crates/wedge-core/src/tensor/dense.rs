//! Materialized order-k tensors.

use crate::error::{Error, Result};
use crate::tensor::TensorEntry;

/// Default cap on dense materialization: 2^27 entries (1 GiB of f64).
/// Larger tensors must stay in lazy CP form.
pub const DENSE_CAP_DEFAULT: usize = 1 << 27;

/// A dense order-k tensor stored row-major (first index slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    /// Zero tensor of the given shape, subject to the default dense cap.
    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::zeros_with_cap(shape, DENSE_CAP_DEFAULT)
    }

    pub fn zeros_with_cap(shape: &[usize], cap: usize) -> Result<Self> {
        let n = checked_len(shape, cap)?;
        Ok(DenseTensor { shape: shape.to_vec(), data: vec![0.0; n] })
    }

    /// Wrap an existing row-major buffer.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n = checked_len(shape, usize::MAX)?;
        if data.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "buffer has {} entries, shape {:?} needs {}",
                data.len(),
                shape,
                n
            )));
        }
        Ok(DenseTensor { shape: shape.to_vec(), data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Row-major offset of a multi-index (first index slowest).
    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len()
            || index.iter().zip(&self.shape).any(|(&i, &d)| i >= d)
        {
            return Err(Error::IndexOutOfRange {
                index: index.to_vec(),
                shape: self.shape.clone(),
            });
        }
        let mut off = 0usize;
        for (&i, &d) in index.iter().zip(&self.shape) {
            off = off * d + i;
        }
        Ok(off)
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.offset(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let off = self.offset(index)?;
        self.data[off] = value;
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// Entrywise difference `self - other`.
    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(DenseTensor { shape: self.shape.clone(), data })
    }

    /// Mode-`mode` tensor-vector product; output has order k-1 and is indexed
    /// by the remaining modes in their original order.
    pub fn mode_product(&self, mode: usize, u: &[f64]) -> Result<DenseTensor> {
        let k = self.order();
        if mode >= k {
            return Err(Error::InvalidMode { mode, order: k });
        }
        if u.len() != self.shape[mode] {
            return Err(Error::ShapeMismatch(format!(
                "vector length {} vs mode-{} dimension {}",
                u.len(),
                mode,
                self.shape[mode]
            )));
        }
        let out_shape: Vec<usize> = self
            .shape
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != mode)
            .map(|(_, &d)| d)
            .collect();
        // Row-major strides: inner = product of dims after `mode`,
        // outer blocks iterate dims before `mode`.
        let inner: usize = self.shape[mode + 1..].iter().product();
        let outer: usize = self.shape[..mode].iter().product();
        let nm = self.shape[mode];
        let mut out = vec![0.0; outer * inner];
        for a in 0..outer {
            let src_base = a * nm * inner;
            let dst_base = a * inner;
            for (im, &w) in u.iter().enumerate() {
                let src = src_base + im * inner;
                let dst = &mut out[dst_base..dst_base + inner];
                let block = &self.data[src..src + inner];
                for (o, &v) in dst.iter_mut().zip(block) {
                    *o += v * w;
                }
            }
        }
        DenseTensor::from_vec(&out_shape, out)
    }

    /// Mode-`mode` tensor-matrix product with `M` of shape `p x n_mode`;
    /// the mode dimension becomes `p`.
    pub fn mode_multiply(&self, mode: usize, m: &nalgebra::DMatrix<f64>) -> Result<DenseTensor> {
        let k = self.order();
        if mode >= k {
            return Err(Error::InvalidMode { mode, order: k });
        }
        let nm = self.shape[mode];
        if m.ncols() != nm {
            return Err(Error::ShapeMismatch(format!(
                "matrix has {} columns, mode-{} dimension is {}",
                m.ncols(),
                mode,
                nm
            )));
        }
        let p = m.nrows();
        let inner: usize = self.shape[mode + 1..].iter().product();
        let outer: usize = self.shape[..mode].iter().product();
        let mut out_shape = self.shape.clone();
        out_shape[mode] = p;
        let mut out = vec![0.0; outer * p * inner];
        for a in 0..outer {
            let src_base = a * nm * inner;
            let dst_base = a * p * inner;
            for im in 0..nm {
                let block = &self.data[src_base + im * inner..src_base + (im + 1) * inner];
                for row in 0..p {
                    let w = m[(row, im)];
                    if w == 0.0 {
                        continue;
                    }
                    let dst = dst_base + row * inner;
                    for (o, &v) in out[dst..dst + inner].iter_mut().zip(block) {
                        *o += w * v;
                    }
                }
            }
        }
        DenseTensor::from_vec(&out_shape, out)
    }

    /// Full inner product with a rank-1 tensor, via chained mode products
    /// (contracting the last mode first keeps earlier indices intact).
    pub fn rank1_inner(&self, vectors: &[&[f64]]) -> Result<f64> {
        if vectors.len() != self.order() {
            return Err(Error::ShapeMismatch(format!(
                "{} vectors for order-{} tensor",
                vectors.len(),
                self.order()
            )));
        }
        let mut cur = self.clone();
        for (mode, u) in vectors.iter().enumerate().rev() {
            cur = cur.mode_product(mode, u)?;
        }
        debug_assert!(cur.order() == 0 && cur.data.len() == 1);
        Ok(cur.data[0])
    }
}

impl TensorEntry for DenseTensor {
    fn shape(&self) -> &[usize] {
        &self.shape
    }

    fn entry(&self, index: &[usize]) -> f64 {
        let mut off = 0usize;
        for (&i, &d) in index.iter().zip(&self.shape) {
            off = off * d + i;
        }
        self.data[off]
    }
}

fn checked_len(shape: &[usize], cap: usize) -> Result<usize> {
    if shape.is_empty() {
        return Ok(1); // order-0 tensor: a scalar
    }
    if shape.iter().any(|&d| d == 0) {
        return Err(Error::ShapeMismatch(format!("zero dimension in {:?}", shape)));
    }
    let total: u128 = shape.iter().map(|&d| d as u128).product();
    if total > cap as u128 {
        return Err(Error::DenseCapExceeded { requested: total, cap });
    }
    Ok(total as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_are_row_major_first_index_slowest() {
        let t = DenseTensor::from_vec(&[2, 3], (0..6).map(|v| v as f64).collect()).unwrap();
        // (i, j) -> 3i + j
        assert_eq!(t.get(&[0, 0]).unwrap(), 0.0);
        assert_eq!(t.get(&[0, 2]).unwrap(), 2.0);
        assert_eq!(t.get(&[1, 0]).unwrap(), 3.0);
        assert_eq!(t.get(&[1, 2]).unwrap(), 5.0);
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let t = DenseTensor::zeros(&[2, 2]).unwrap();
        assert!(matches!(t.get(&[2, 0]), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(t.get(&[0]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn cap_is_enforced() {
        let err = DenseTensor::zeros_with_cap(&[100, 100], 100).unwrap_err();
        assert!(matches!(err, Error::DenseCapExceeded { .. }));
    }

    #[test]
    fn mode_product_with_basis_vector_extracts_slice() {
        // T[i,j,k] = 100i + 10j + k over 2x3x2.
        let mut t = DenseTensor::zeros(&[2, 3, 2]).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..2 {
                    t.set(&[i, j, k], (100 * i + 10 * j + k) as f64).unwrap();
                }
            }
        }
        let e1 = [0.0, 1.0, 0.0];
        let s = t.mode_product(1, &e1).unwrap();
        assert_eq!(s.shape(), &[2, 2]);
        for i in 0..2 {
            for k in 0..2 {
                assert_eq!(s.get(&[i, k]).unwrap(), (100 * i + 10 + k) as f64);
            }
        }
    }

    #[test]
    fn mode_product_of_ones_tensor_sums_the_mode() {
        let t = DenseTensor::from_vec(&[2, 2, 2], vec![1.0; 8]).unwrap();
        let s = t.mode_product(2, &[1.0, 1.0]).unwrap();
        assert_eq!(s.shape(), &[2, 2]);
        assert!(s.data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn rank1_inner_matches_triple_loop() {
        let mut t = DenseTensor::zeros(&[3, 4, 2]).unwrap();
        let mut x = 0.3f64;
        for v in t.data_mut() {
            x = (x * 997.0 + 0.123).fract();
            *v = x - 0.5;
        }
        let u: Vec<f64> = (0..3).map(|i| 0.2 * i as f64 - 0.1).collect();
        let v: Vec<f64> = (0..4).map(|i| 0.5 - 0.3 * i as f64).collect();
        let w: Vec<f64> = (0..2).map(|i| 1.0 + i as f64).collect();
        let mut direct = 0.0;
        for a in 0..3 {
            for b in 0..4 {
                for c in 0..2 {
                    direct += t.get(&[a, b, c]).unwrap() * u[a] * v[b] * w[c];
                }
            }
        }
        let chained = t.rank1_inner(&[&u, &v, &w]).unwrap();
        assert!((chained - direct).abs() <= 1e-12 * direct.abs().max(1.0));
    }
}
