//! Wedge index sampling and the debiased wedge matrix.

use nalgebra::DMatrix;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::tensor::MatrixEntry;

/// One sampled wedge `(i, l, j)` with `i <= j`: a length-two path through
/// column `l` of the unfolding, touching rows `i` and `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WedgeTriple {
    pub i: u32,
    pub l: u64,
    pub j: u32,
}

/// The sampled subset of the wedge space
/// `W = {(i, l, j) : 0 <= i <= j < n, l in [m]}`.
///
/// Triples are stored sorted by their encoded index
/// `pair_index(i, j) * m + l`, deduplicated by construction.
#[derive(Debug, Clone)]
pub struct WedgeSampleSet {
    n: usize,
    m: u64,
    p: f64,
    seed: u64,
    triples: Vec<WedgeTriple>,
}

impl WedgeSampleSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn rate(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn triples(&self) -> &[WedgeTriple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Number of diagonal wedges `(i, l, i)`, which reveal a single entry.
    pub fn diagonal_count(&self) -> usize {
        self.triples.iter().filter(|t| t.i == t.j).count()
    }

    /// Entry observations charged against a sampling budget: two per wedge,
    /// one for diagonal wedges.
    pub fn entry_observations(&self) -> u64 {
        2 * self.triples.len() as u64 - self.diagonal_count() as u64
    }

    /// Total size of the wedge space `|W| = m * n(n+1)/2`.
    pub fn space_size(&self) -> u128 {
        pair_count(self.n) as u128 * self.m as u128
    }

    /// Rebuild a sample set from raw encoded indices (used by the binary
    /// reader); indices must be sorted, distinct and in range.
    pub(crate) fn from_encoded(
        n: usize,
        m: u64,
        p: f64,
        seed: u64,
        encoded: Vec<u64>,
    ) -> Result<Self> {
        let total = pair_count(n) as u128 * m as u128;
        let mut triples = Vec::with_capacity(encoded.len());
        let mut prev: Option<u64> = None;
        for id in encoded {
            if (id as u128) >= total {
                return Err(Error::InvalidArgument(format!(
                    "encoded wedge index {} out of range",
                    id
                )));
            }
            if prev.map_or(false, |p| p >= id) {
                return Err(Error::InvalidArgument("wedge indices not sorted/distinct".into()));
            }
            prev = Some(id);
            triples.push(decode_triple(id, n, m));
        }
        Ok(WedgeSampleSet { n, m, p, seed, triples })
    }

    pub(crate) fn encoded(&self) -> impl Iterator<Item = u64> + '_ {
        let (n, m) = (self.n, self.m);
        self.triples.iter().map(move |t| encode_triple(t, n, m))
    }
}

/// Number of unordered row pairs (i <= j) over [n].
fn pair_count(n: usize) -> u64 {
    let n = n as u64;
    n * (n + 1) / 2
}

/// Pairs before row i (0-based): rows 0..i contribute n, n-1, ..., n-i+1.
fn pairs_before_row(i: u64, n: u64) -> u64 {
    i * n - i * i.saturating_sub(1) / 2
}

fn encode_triple(t: &WedgeTriple, n: usize, m: u64) -> u64 {
    let i = t.i as u64;
    let pid = pairs_before_row(i, n as u64) + (t.j as u64 - i);
    pid * m + t.l
}

fn decode_triple(id: u64, n: usize, m: u64) -> WedgeTriple {
    let pid = id / m;
    let l = id % m;
    let n64 = n as u64;
    // Invert pid -> (i, j): float guess for the row, then exact fix-up.
    let fi = {
        let b = 2.0 * n64 as f64 + 1.0;
        ((b - (b * b - 8.0 * pid as f64).max(0.0).sqrt()) / 2.0).floor()
    };
    let mut i = if fi < 0.0 { 0 } else { fi as u64 };
    i = i.min(n64 - 1);
    while i > 0 && pairs_before_row(i, n64) > pid {
        i -= 1;
    }
    while i + 1 < n64 && pairs_before_row(i + 1, n64) <= pid {
        i += 1;
    }
    let j = i + (pid - pairs_before_row(i, n64));
    debug_assert!(j < n64 && j >= i);
    WedgeTriple { i: i as u32, l, j: j as u32 }
}

/// Sample the wedge space of an `n x m` unfolding at rate `p`.
///
/// The distribution over subsets equals independent Bernoulli(p) inclusion of
/// every triple: the subset size is drawn from Binomial(|W|, p) and then a
/// uniform subset of that size is selected, which avoids enumerating the
/// whole wedge space. Deterministic given `seed` (ChaCha8 stream).
pub fn sample_wedges(n: usize, m: u64, p: f64, seed: u64) -> Result<WedgeSampleSet> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidRate { rate: p });
    }
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("empty wedge space".into()));
    }
    let total_wide = pair_count(n) as u128 * m as u128;
    if total_wide > u64::MAX as u128 {
        return Err(Error::IndexOverflow { total: total_wide });
    }
    let total = total_wide as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = if p >= 1.0 {
        total
    } else {
        Binomial::new(total, p)
            .map_err(|e| Error::InvalidArgument(format!("binomial: {e}")))?
            .sample(&mut rng)
    };
    let encoded = super::sample_distinct_sorted(total, count, &mut rng);
    let triples = encoded.into_iter().map(|id| decode_triple(id, n, m)).collect();
    Ok(WedgeSampleSet { n, m, p, seed, triples })
}

/// The debiased wedge matrix `Z` with `E[Z] = A Aᵀ`.
#[derive(Debug, Clone)]
pub struct WedgeMatrix {
    pub z: DMatrix<f64>,
    pub p: f64,
    pub seed: u64,
    pub wedge_count: usize,
    pub diagonal_count: usize,
}

impl WedgeMatrix {
    /// Entry observations consumed: two per wedge, one for diagonal wedges.
    pub fn entry_observations(&self) -> u64 {
        2 * self.wedge_count as u64 - self.diagonal_count as u64
    }
}

/// Assemble `Z` from an entry oracle and a wedge sample set:
/// `Z_ij = p^{-1} sum_{l : (i,l,j) sampled} A_il A_jl` for `i != j` (stored
/// symmetrically), and `Z_ii = p^{-1} sum A_il^2` over diagonal wedges.
///
/// The oracle is consulted at most twice per wedge. Accumulation runs in
/// sorted triple order, so the result is reproducible bit for bit.
pub fn build_wedge_matrix(
    oracle: &(impl MatrixEntry + ?Sized),
    wedges: &WedgeSampleSet,
) -> Result<WedgeMatrix> {
    if oracle.nrows() != wedges.n() || oracle.ncols() != wedges.m() {
        return Err(Error::ShapeMismatch(format!(
            "oracle is {}x{}, wedge set expects {}x{}",
            oracle.nrows(),
            oracle.ncols(),
            wedges.n(),
            wedges.m()
        )));
    }
    let n = wedges.n();
    let inv_p = 1.0 / wedges.rate();
    let mut z = DMatrix::<f64>::zeros(n, n);
    let mut diagonal = 0usize;
    for t in wedges.triples() {
        let (i, j, l) = (t.i as usize, t.j as usize, t.l);
        if i == j {
            let a = oracle.entry(i, l);
            if !a.is_finite() {
                return Err(Error::NonFinite(format!("oracle entry ({}, {})", i, l)));
            }
            z[(i, i)] += inv_p * a * a;
            diagonal += 1;
        } else {
            let a = oracle.entry(i, l);
            let b = oracle.entry(j, l);
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::NonFinite(format!("oracle entries at column {}", l)));
            }
            let v = inv_p * a * b;
            z[(i, j)] += v;
            z[(j, i)] = z[(i, j)];
        }
    }
    Ok(WedgeMatrix {
        z,
        p: wedges.rate(),
        seed: wedges.seed(),
        wedge_count: wedges.len(),
        diagonal_count: diagonal,
    })
}
