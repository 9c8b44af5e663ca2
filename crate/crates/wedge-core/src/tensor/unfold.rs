//! Mode-j unfoldings and their inverse.
//!
//! The mode-j unfolding of an order-k tensor is the `n_j x m_j` matrix with
//! `m_j = prod_{l != j} n_l`, rows indexing mode j. Columns enumerate the
//! remaining modes with a fixed bijection: the smallest remaining mode varies
//! fastest,
//!
//! ```text
//! col(i_{l != j}) = sum_{l != j} i_l * prod_{t != j, t < l} n_t   (0-based)
//! ```
//!
//! which makes fold/unfold stride arithmetic trivial and is what every test
//! in the crate assumes.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::{CpModel, DenseTensor, MatrixEntry, TensorEntry};

/// The column-index bijection of a mode-j unfolding.
#[derive(Debug, Clone)]
pub struct ColumnIndexMap {
    /// Remaining modes in ascending order.
    modes: Vec<usize>,
    /// Dimension of each remaining mode.
    dims: Vec<usize>,
    /// Column stride of each remaining mode (first entry 1).
    strides: Vec<u64>,
    cols: u64,
}

impl ColumnIndexMap {
    pub fn new(shape: &[usize], mode: usize) -> Result<Self> {
        if mode >= shape.len() {
            return Err(Error::InvalidMode { mode, order: shape.len() });
        }
        let mut modes = Vec::with_capacity(shape.len() - 1);
        let mut dims = Vec::with_capacity(shape.len() - 1);
        let mut strides = Vec::with_capacity(shape.len() - 1);
        let mut stride = 1u64;
        for (l, &d) in shape.iter().enumerate() {
            if l == mode {
                continue;
            }
            modes.push(l);
            dims.push(d);
            strides.push(stride);
            stride = stride
                .checked_mul(d as u64)
                .ok_or(Error::IndexOverflow { total: u128::MAX })?;
        }
        Ok(ColumnIndexMap { modes, dims, strides, cols: stride })
    }

    pub fn num_cols(&self) -> u64 {
        self.cols
    }

    /// Column index of a full tensor multi-index (the mode-j coordinate is
    /// ignored).
    pub fn col_of(&self, index: &[usize]) -> u64 {
        self.modes
            .iter()
            .zip(&self.strides)
            .map(|(&l, &s)| index[l] as u64 * s)
            .sum()
    }

    /// Write the remaining-mode coordinates of `col` into `index`
    /// (the mode-j slot is left untouched).
    pub fn decode_into(&self, col: u64, index: &mut [usize]) {
        for ((&l, &d), &s) in self.modes.iter().zip(&self.dims).zip(&self.strides) {
            index[l] = ((col / s) % d as u64) as usize;
        }
    }
}

/// A materialized mode-j unfolding.
#[derive(Debug, Clone)]
pub struct UnfoldedMatrix {
    pub mode: usize,
    /// Shape of the tensor it came from.
    pub tensor_shape: Vec<usize>,
    pub matrix: DMatrix<f64>,
}

impl UnfoldedMatrix {
    pub fn column_map(&self) -> ColumnIndexMap {
        ColumnIndexMap::new(&self.tensor_shape, self.mode).expect("shape validated at build")
    }
}

/// Materialize the mode-j unfolding of a dense tensor.
pub fn unfold_dense(t: &DenseTensor, mode: usize) -> Result<UnfoldedMatrix> {
    let map = ColumnIndexMap::new(t.shape(), mode)?;
    let rows = t.shape()[mode];
    let cols = map.num_cols() as usize;
    let mut m = DMatrix::<f64>::zeros(rows, cols);
    let mut index = vec![0usize; t.order()];
    for col in 0..cols {
        map.decode_into(col as u64, &mut index);
        for row in 0..rows {
            index[mode] = row;
            m[(row, col)] = t.entry(&index);
        }
    }
    Ok(UnfoldedMatrix { mode, tensor_shape: t.shape().to_vec(), matrix: m })
}

/// Fold a mode-j unfolding back into a dense tensor (exact inverse of
/// [`unfold_dense`]).
pub fn fold(matrix: &DMatrix<f64>, mode: usize, shape: &[usize]) -> Result<DenseTensor> {
    let map = ColumnIndexMap::new(shape, mode)?;
    if matrix.nrows() != shape[mode] || matrix.ncols() as u64 != map.num_cols() {
        return Err(Error::ShapeMismatch(format!(
            "matrix {}x{} cannot fold into {:?} along mode {}",
            matrix.nrows(),
            matrix.ncols(),
            shape,
            mode
        )));
    }
    let mut t = DenseTensor::zeros_with_cap(shape, usize::MAX)?;
    let mut index = vec![0usize; shape.len()];
    for col in 0..matrix.ncols() {
        map.decode_into(col as u64, &mut index);
        for row in 0..matrix.nrows() {
            index[mode] = row;
            t.set(&index, matrix[(row, col)])?;
        }
    }
    Ok(t)
}

/// Lazy mode-j unfolding of a CP model: entries are evaluated on demand,
/// never materialized. This is the entry oracle handed to wedge sampling
/// when the unfolding would blow the dense cap.
#[derive(Debug, Clone)]
pub struct CpUnfolding<'a> {
    model: &'a CpModel,
    mode: usize,
    map: ColumnIndexMap,
}

impl<'a> CpUnfolding<'a> {
    pub fn new(model: &'a CpModel, mode: usize) -> Result<Self> {
        let map = ColumnIndexMap::new(model.dims(), mode)?;
        Ok(CpUnfolding { model, mode, map })
    }

    pub fn column_map(&self) -> &ColumnIndexMap {
        &self.map
    }
}

impl MatrixEntry for CpUnfolding<'_> {
    fn nrows(&self) -> usize {
        self.model.dims()[self.mode]
    }

    fn ncols(&self) -> u64 {
        self.map.num_cols()
    }

    fn entry(&self, row: usize, col: u64) -> f64 {
        let mut index = vec![0usize; self.model.order()];
        self.map.decode_into(col, &mut index);
        index[self.mode] = row;
        self.model.entry(&index)
    }
}

/// Convenience alias used by callers that hold a model.
pub fn unfold_cp<'a>(model: &'a CpModel, mode: usize) -> Result<CpUnfolding<'a>> {
    CpUnfolding::new(model, mode)
}

impl MatrixEntry for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> u64 {
        DMatrix::ncols(self) as u64
    }

    fn entry(&self, row: usize, col: u64) -> f64 {
        self[(row, col as usize)]
    }
}
