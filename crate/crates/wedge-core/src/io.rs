//! File formats.
//!
//! Binary layouts (all integers and floats little-endian):
//!
//! - Tensor: 12-byte magic `WEDGE-TENSOR` + u32 version (16-byte header),
//!   u32 order k, u32 dims[k], f64 entries row-major (first index slowest).
//! - Matrix: `WEDGE-MATRIX` + u32 version, u32 rows, u32 cols, f64 entries
//!   row-major.
//! - Subspace estimate: `WEDGE-SUBSPC` + u32 version, u32 n, u32 r, f64
//!   basis row-major, then r f64 eigenvalues.
//! - Sample sets: `WEDGE-SAMPLE` + u32 version, u8 kind (0 = wedge,
//!   1 = uniform observations), kind-specific header, u64 count, then
//!   `count` sorted u64-encoded indices. Wedge triples encode as
//!   `pair_index(i, j) * m + l`; observations encode row-major.
//!
//! CP models serialize as JSON `{order, dims, rank, symmetric, factors}`
//! with per-mode row-major factor matrices.
//!
//! CSV exports of sample sets are 0-indexed.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{ObservationSet, WedgeSampleSet};
use crate::spectral::{EigOrdering, SubspaceEstimate};
use crate::tensor::{CpModel, DenseTensor};

const TENSOR_MAGIC: &[u8; 12] = b"WEDGE-TENSOR";
const MATRIX_MAGIC: &[u8; 12] = b"WEDGE-MATRIX";
const SUBSPACE_MAGIC: &[u8; 12] = b"WEDGE-SUBSPC";
const SAMPLE_MAGIC: &[u8; 12] = b"WEDGE-SAMPLE";
const FORMAT_VERSION: u32 = 1;

fn open_read(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

fn open_write(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

fn wrap_io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::io(path.display().to_string(), e))
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), reason: reason.into() }
}

fn write_header(w: &mut impl Write, magic: &[u8; 12]) -> std::io::Result<()> {
    w.write_all(magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())
}

fn read_header(r: &mut impl Read, magic: &[u8; 12], path: &Path) -> Result<()> {
    let mut buf = [0u8; 12];
    wrap_io(path, r.read_exact(&mut buf))?;
    if &buf != magic {
        return Err(format_err(path, "bad magic"));
    }
    let version = read_u32(r, path)?;
    if version != FORMAT_VERSION {
        return Err(format_err(path, format!("unsupported version {}", version)));
    }
    Ok(())
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut b = [0u8; 4];
    wrap_io(path, r.read_exact(&mut b))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read, path: &Path) -> Result<u64> {
    let mut b = [0u8; 8];
    wrap_io(path, r.read_exact(&mut b))?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read, path: &Path) -> Result<f64> {
    let mut b = [0u8; 8];
    wrap_io(path, r.read_exact(&mut b))?;
    Ok(f64::from_le_bytes(b))
}

fn read_u8(r: &mut impl Read, path: &Path) -> Result<u8> {
    let mut b = [0u8; 1];
    wrap_io(path, r.read_exact(&mut b))?;
    Ok(b[0])
}

// ---------------------------------------------------------------- tensors

pub fn write_tensor(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_write(path)?;
    wrap_io(path, write_header(&mut w, TENSOR_MAGIC))?;
    wrap_io(path, w.write_all(&(t.order() as u32).to_le_bytes()))?;
    for &d in t.shape() {
        wrap_io(path, w.write_all(&(d as u32).to_le_bytes()))?;
    }
    for &v in t.data() {
        wrap_io(path, w.write_all(&v.to_le_bytes()))?;
    }
    wrap_io(path, w.flush())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let path = path.as_ref();
    let mut r = open_read(path)?;
    read_header(&mut r, TENSOR_MAGIC, path)?;
    let k = read_u32(&mut r, path)? as usize;
    if k == 0 || k > 8 {
        return Err(format_err(path, format!("implausible order {}", k)));
    }
    let mut shape = Vec::with_capacity(k);
    for _ in 0..k {
        shape.push(read_u32(&mut r, path)? as usize);
    }
    let total: u128 = shape.iter().map(|&d| d as u128).product();
    if total > crate::tensor::DENSE_CAP_DEFAULT as u128 {
        return Err(Error::DenseCapExceeded { requested: total, cap: crate::tensor::DENSE_CAP_DEFAULT });
    }
    let mut data = Vec::with_capacity(total as usize);
    for _ in 0..total {
        data.push(read_f64(&mut r, path)?);
    }
    DenseTensor::from_vec(&shape, data)
}

// --------------------------------------------------------------- matrices

pub fn write_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_write(path)?;
    wrap_io(path, write_header(&mut w, MATRIX_MAGIC))?;
    wrap_io(path, w.write_all(&(m.nrows() as u32).to_le_bytes()))?;
    wrap_io(path, w.write_all(&(m.ncols() as u32).to_le_bytes()))?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            wrap_io(path, w.write_all(&m[(i, j)].to_le_bytes()))?;
        }
    }
    wrap_io(path, w.flush())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let mut r = open_read(path)?;
    read_header(&mut r, MATRIX_MAGIC, path)?;
    let rows = read_u32(&mut r, path)? as usize;
    let cols = read_u32(&mut r, path)? as usize;
    let mut m = DMatrix::<f64>::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = read_f64(&mut r, path)?;
        }
    }
    Ok(m)
}

// -------------------------------------------------------------- subspaces

pub fn write_subspace(path: impl AsRef<Path>, s: &SubspaceEstimate) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_write(path)?;
    wrap_io(path, write_header(&mut w, SUBSPACE_MAGIC))?;
    wrap_io(path, w.write_all(&(s.basis.nrows() as u32).to_le_bytes()))?;
    wrap_io(path, w.write_all(&(s.basis.ncols() as u32).to_le_bytes()))?;
    for i in 0..s.basis.nrows() {
        for j in 0..s.basis.ncols() {
            wrap_io(path, w.write_all(&s.basis[(i, j)].to_le_bytes()))?;
        }
    }
    for &ev in &s.eigenvalues {
        wrap_io(path, w.write_all(&ev.to_le_bytes()))?;
    }
    wrap_io(path, w.flush())
}

pub fn read_subspace(path: impl AsRef<Path>) -> Result<SubspaceEstimate> {
    let path = path.as_ref();
    let mut r = open_read(path)?;
    read_header(&mut r, SUBSPACE_MAGIC, path)?;
    let rows = read_u32(&mut r, path)? as usize;
    let cols = read_u32(&mut r, path)? as usize;
    let mut basis = DMatrix::<f64>::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            basis[(i, j)] = read_f64(&mut r, path)?;
        }
    }
    let mut eigenvalues = Vec::with_capacity(cols);
    for _ in 0..cols {
        eigenvalues.push(read_f64(&mut r, path)?);
    }
    Ok(SubspaceEstimate { basis, eigenvalues, degenerate_gap: false, ordering: EigOrdering::Signed })
}

// -------------------------------------------------------------- CP models

#[derive(Serialize, Deserialize)]
struct CpModelDto {
    order: usize,
    dims: Vec<usize>,
    rank: usize,
    symmetric: bool,
    /// Row-major `n_j x rank` factor matrix per mode.
    factors: Vec<Vec<f64>>,
}

pub fn cp_model_to_json(model: &CpModel) -> Result<String> {
    let dto = CpModelDto {
        order: model.order(),
        dims: model.dims().to_vec(),
        rank: model.rank(),
        symmetric: model.is_symmetric(),
        factors: (0..model.order())
            .map(|j| {
                let f = model.factor(j);
                let mut flat = Vec::with_capacity(f.nrows() * f.ncols());
                for i in 0..f.nrows() {
                    for c in 0..f.ncols() {
                        flat.push(f[(i, c)]);
                    }
                }
                flat
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&dto)?)
}

pub fn cp_model_from_json(json: &str) -> Result<CpModel> {
    let dto: CpModelDto = serde_json::from_str(json)?;
    if dto.dims.len() != dto.order || dto.factors.len() != dto.order {
        return Err(Error::InvalidArgument("order disagrees with dims/factors".into()));
    }
    let mut factors = Vec::with_capacity(dto.order);
    for (j, flat) in dto.factors.iter().enumerate() {
        let n = dto.dims[j];
        if flat.len() != n * dto.rank {
            return Err(Error::InvalidArgument(format!(
                "mode {}: {} values for a {}x{} factor",
                j,
                flat.len(),
                n,
                dto.rank
            )));
        }
        factors.push(DMatrix::from_row_slice(n, dto.rank, flat));
    }
    CpModel::new(factors, dto.symmetric)
}

pub fn write_cp_model(path: impl AsRef<Path>, model: &CpModel) -> Result<()> {
    let path = path.as_ref();
    let json = cp_model_to_json(model)?;
    let mut w = open_write(path)?;
    wrap_io(path, w.write_all(json.as_bytes()))?;
    wrap_io(path, w.flush())
}

pub fn read_cp_model(path: impl AsRef<Path>) -> Result<CpModel> {
    let path = path.as_ref();
    let mut r = open_read(path)?;
    let mut json = String::new();
    wrap_io(path, r.read_to_string(&mut json))?;
    cp_model_from_json(&json)
}

// ------------------------------------------------------------ sample sets

pub fn write_wedge_samples(path: impl AsRef<Path>, w: &WedgeSampleSet) -> Result<()> {
    let path = path.as_ref();
    let mut out = open_write(path)?;
    wrap_io(path, write_header(&mut out, SAMPLE_MAGIC))?;
    wrap_io(path, out.write_all(&[0u8]))?;
    wrap_io(path, out.write_all(&(w.n() as u32).to_le_bytes()))?;
    wrap_io(path, out.write_all(&w.m().to_le_bytes()))?;
    wrap_io(path, out.write_all(&w.rate().to_le_bytes()))?;
    wrap_io(path, out.write_all(&w.seed().to_le_bytes()))?;
    wrap_io(path, out.write_all(&(w.len() as u64).to_le_bytes()))?;
    for id in w.encoded() {
        wrap_io(path, out.write_all(&id.to_le_bytes()))?;
    }
    wrap_io(path, out.flush())
}

pub fn read_wedge_samples(path: impl AsRef<Path>) -> Result<WedgeSampleSet> {
    let path = path.as_ref();
    let mut r = open_read(path)?;
    read_header(&mut r, SAMPLE_MAGIC, path)?;
    if read_u8(&mut r, path)? != 0 {
        return Err(format_err(path, "not a wedge sample set"));
    }
    let n = read_u32(&mut r, path)? as usize;
    let m = read_u64(&mut r, path)?;
    let p = read_f64(&mut r, path)?;
    let seed = read_u64(&mut r, path)?;
    let count = read_u64(&mut r, path)? as usize;
    let mut encoded = Vec::with_capacity(count);
    for _ in 0..count {
        encoded.push(read_u64(&mut r, path)?);
    }
    WedgeSampleSet::from_encoded(n, m, p, seed, encoded)
}

pub fn write_observations(path: impl AsRef<Path>, o: &ObservationSet) -> Result<()> {
    let path = path.as_ref();
    let mut out = open_write(path)?;
    wrap_io(path, write_header(&mut out, SAMPLE_MAGIC))?;
    wrap_io(path, out.write_all(&[1u8]))?;
    wrap_io(path, out.write_all(&(o.shape().len() as u32).to_le_bytes()))?;
    for &d in o.shape() {
        wrap_io(path, out.write_all(&(d as u32).to_le_bytes()))?;
    }
    wrap_io(path, out.write_all(&o.rate().to_le_bytes()))?;
    wrap_io(path, out.write_all(&o.seed().to_le_bytes()))?;
    wrap_io(path, out.write_all(&(o.len() as u64).to_le_bytes()))?;
    for &id in o.encoded() {
        wrap_io(path, out.write_all(&id.to_le_bytes()))?;
    }
    wrap_io(path, out.flush())
}

pub fn read_observations(path: impl AsRef<Path>) -> Result<ObservationSet> {
    let path = path.as_ref();
    let mut r = open_read(path)?;
    read_header(&mut r, SAMPLE_MAGIC, path)?;
    if read_u8(&mut r, path)? != 1 {
        return Err(format_err(path, "not an observation set"));
    }
    let k = read_u32(&mut r, path)? as usize;
    let mut shape = Vec::with_capacity(k);
    for _ in 0..k {
        shape.push(read_u32(&mut r, path)? as usize);
    }
    let q = read_f64(&mut r, path)?;
    let seed = read_u64(&mut r, path)?;
    let count = read_u64(&mut r, path)? as usize;
    let mut encoded = Vec::with_capacity(count);
    for _ in 0..count {
        encoded.push(read_u64(&mut r, path)?);
    }
    ObservationSet::from_encoded(&shape, q, seed, encoded)
}

/// CSV of a wedge sample set: header `i,ell,j`, 0-indexed rows.
pub fn wedge_samples_to_csv(w: &WedgeSampleSet, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "i,ell,j")?;
    for t in w.triples() {
        writeln!(out, "{},{},{}", t.i, t.l, t.j)?;
    }
    Ok(())
}

/// CSV of an observation set: header `idx0,...,idx{k-1}`, 0-indexed rows.
pub fn observations_to_csv(o: &ObservationSet, out: &mut impl Write) -> std::io::Result<()> {
    let k = o.shape().len();
    let header: Vec<String> = (0..k).map(|j| format!("idx{}", j)).collect();
    writeln!(out, "{}", header.join(","))?;
    for idx in o.iter_indices() {
        let row: Vec<String> = idx.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_uniform, sample_wedges};

    #[test]
    fn tensor_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wt");
        let model = CpModel::random_gaussian(&[3, 4, 2], 2, 5).unwrap();
        let t = model.to_dense().unwrap();
        write_tensor(&path, &t).unwrap();
        let back = read_tensor(&path).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn matrix_and_subspace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = DMatrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 * 0.5 - 2.0);
        let mp = dir.path().join("m.wm");
        write_matrix(&mp, &m).unwrap();
        assert_eq!(read_matrix(&mp).unwrap(), m);

        let q = m.clone().qr().q();
        let est = SubspaceEstimate {
            basis: q.clone(),
            eigenvalues: vec![3.0, 2.0, 1.0],
            degenerate_gap: false,
            ordering: EigOrdering::Signed,
        };
        let sp = dir.path().join("s.ws");
        write_subspace(&sp, &est).unwrap();
        let back = read_subspace(&sp).unwrap();
        assert_eq!(back.basis, q);
        assert_eq!(back.eigenvalues, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn cp_model_json_round_trip() {
        let model = CpModel::random_gaussian(&[3, 5, 4], 2, 9).unwrap();
        let json = cp_model_to_json(&model).unwrap();
        let back = cp_model_from_json(&json).unwrap();
        assert_eq!(&model, &back);

        let sym = CpModel::random_gaussian_symmetric(4, 2, 3, 9).unwrap();
        let back = cp_model_from_json(&cp_model_to_json(&sym).unwrap()).unwrap();
        assert!(back.is_symmetric());
        assert_eq!(sym.factor(0), back.factor(0));
    }

    #[test]
    fn sample_set_round_trips_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let w = sample_wedges(10, 30, 0.1, 3).unwrap();
        let wp = dir.path().join("w.wsmp");
        write_wedge_samples(&wp, &w).unwrap();
        let back = read_wedge_samples(&wp).unwrap();
        assert_eq!(w.triples(), back.triples());
        assert_eq!(w.rate(), back.rate());

        let o = sample_uniform(&[4, 4, 4], 0.3, 7).unwrap();
        let op = dir.path().join("o.wsmp");
        write_observations(&op, &o).unwrap();
        let back = read_observations(&op).unwrap();
        assert_eq!(o.encoded(), back.encoded());

        let mut csv = Vec::new();
        wedge_samples_to_csv(&w, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("i,ell,j\n"));
        assert_eq!(text.lines().count(), w.len() + 1);

        let mut csv = Vec::new();
        observations_to_csv(&o, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("idx0,idx1,idx2\n"));
    }

    #[test]
    fn bad_magic_is_reported_with_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"not a wedge file at all").unwrap();
        match read_tensor(&path) {
            Err(Error::Format { path: p, .. }) => assert!(p.contains("junk.bin")),
            other => panic!("expected format error, got {:?}", other.map(|_| ())),
        }
    }
}
