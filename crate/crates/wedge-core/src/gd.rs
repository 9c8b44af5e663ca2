//! CP-factor retrieval and gradient descent on the sampled least-squares
//! objective, for order-3 symmetric tensors.
//!
//! The objective is
//!
//! ```text
//! F(X) = 1/(6q) || P_Omega( T - sum_i x_i ⊗ x_i ⊗ x_i ) ||_F^2
//! ```
//!
//! with gradient column `i` equal to
//! `1/(3q) (E ×_2 x_i ×_3 x_i + E ×_1 x_i ×_3 x_i + E ×_1 x_i ×_2 x_i)`
//! where `E = P_Omega(sum_j x_j^{⊗3} - T)`; both evaluate sparsely over the
//! observation set in `O(|Omega| r)`.

use nalgebra::{DMatrix, DVector};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;
use crate::sampling::ObservationSet;
use crate::tensor::{CpModel, TensorEntry};

/// The observed entries of an order-3 symmetric-shape tensor, gathered once
/// so retrieval, the objective, and the gradient reuse the same values.
#[derive(Debug, Clone)]
pub struct SparseObservations {
    n: usize,
    q: f64,
    indices: Vec<[u32; 3]>,
    values: Vec<f64>,
}

impl SparseObservations {
    /// Gather the values of `oracle` on the observation set. The tensor must
    /// be order 3 with equal dimensions.
    pub fn gather(obs: &ObservationSet, oracle: &(impl TensorEntry + ?Sized)) -> Result<Self> {
        let shape = oracle.shape();
        if shape.len() != 3 || shape[1] != shape[0] || shape[2] != shape[0] {
            return Err(Error::ShapeMismatch(format!(
                "gradient descent supports n x n x n tensors, got {:?}",
                shape
            )));
        }
        if obs.shape() != shape {
            return Err(Error::ShapeMismatch(format!(
                "observations over {:?}, tensor is {:?}",
                obs.shape(),
                shape
            )));
        }
        let mut indices = Vec::with_capacity(obs.len());
        let mut values = Vec::with_capacity(obs.len());
        let mut idx = [0usize; 3];
        for &id in obs.encoded() {
            obs.decode(id, &mut idx);
            indices.push([idx[0] as u32, idx[1] as u32, idx[2] as u32]);
            values.push(oracle.entry(&idx));
        }
        Ok(SparseObservations { n: shape[0], q: obs.rate(), indices, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `q^{-1} <P_Omega(T), u ⊗ u ⊗ u>`.
    pub fn debiased_cubic_form(&self, u: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for (idx, &v) in self.indices.iter().zip(&self.values) {
            acc += v * u[idx[0] as usize] * u[idx[1] as usize] * u[idx[2] as usize];
        }
        acc / self.q
    }

    /// `q^{-1} P_Omega(T) ×_3 theta` as a dense `n x n` matrix.
    pub fn debiased_mode3_contraction(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::<f64>::zeros(self.n, self.n);
        for (idx, &v) in self.indices.iter().zip(&self.values) {
            m[(idx[0] as usize, idx[1] as usize)] += v * theta[idx[2] as usize];
        }
        m / self.q
    }
}

/// One probe of the retrieval procedure: a Gaussian vector pushed through
/// the estimated subspace selects one CP direction; the contraction's top
/// singular pair and its debiased cubic form score the candidate.
#[derive(Debug, Clone)]
pub struct RetrievalCandidate {
    pub probe: usize,
    /// Unit top singular vector of the contracted matrix, sign-flipped so
    /// the cubic form is nonnegative.
    pub vector: DVector<f64>,
    /// `q^{-1} <P_Omega(T), u^{⊗3}>`, nonnegative after the sign flip.
    pub lambda: f64,
    /// Gap between the two leading singular values of the contraction.
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct RetrievalConfig {
    /// Number of probe trials L.
    pub probes: usize,
    /// Candidates correlated above this with an already-selected one are
    /// pruned.
    pub correlation_threshold: f64,
    pub seed: u64,
}

impl RetrievalConfig {
    pub fn new(rank: usize, seed: u64) -> Self {
        RetrievalConfig {
            probes: default_probes(rank),
            correlation_threshold: 0.5,
            seed,
        }
    }
}

/// Default probe count: max(32, 8 r ceil(ln r + 1)).
pub fn default_probes(rank: usize) -> usize {
    let lr = ((rank as f64).ln() + 1.0).ceil() as usize;
    (8 * rank * lr).max(32)
}

/// Result of the retrieval step.
#[derive(Debug, Clone)]
pub struct Retrieval {
    /// Initialization `X_0` with columns `lambda_i^{1/3} u_i`.
    pub x0: DMatrix<f64>,
    /// All candidates, in probe order.
    pub candidates: Vec<RetrievalCandidate>,
    /// Indices (into `candidates`) of the selected ones, gap-descending.
    pub selected: Vec<usize>,
}

/// Refine a subspace estimate into per-factor estimates.
///
/// Runs `L` probe trials: `theta = Û Ûᵀ g` with `g` standard Gaussian,
/// `M = q^{-1} P_Omega(T) ×_3 theta`, candidate = top singular vector of `M`
/// with the spectral gap `sigma_1 - sigma_2` as its score. Greedy pruning
/// keeps `r` candidates by descending gap, rejecting any whose correlation
/// with an already-selected vector exceeds the threshold.
pub fn retrieve_cp_factors(
    basis: &DMatrix<f64>,
    obs: &SparseObservations,
    rank: usize,
    cfg: &RetrievalConfig,
) -> Result<Retrieval> {
    let n = obs.n();
    if basis.nrows() != n {
        return Err(Error::ShapeMismatch(format!(
            "basis has {} rows, tensor dimension is {}",
            basis.nrows(),
            n
        )));
    }
    if cfg.probes < rank {
        return Err(Error::InvalidArgument(format!(
            "{} probes cannot yield {} factors",
            cfg.probes, rank
        )));
    }
    let mut candidates = Vec::with_capacity(cfg.probes);
    for probe in 0..cfg.probes {
        let mut stream = rng::stream(cfg.seed, &[rng::label::PROBE, probe as u64]);
        let g = DVector::<f64>::from_fn(n, |_, _| rand::Rng::sample(&mut stream, StandardNormal));
        let theta = basis * (basis.transpose() * &g);
        let m = obs.debiased_mode3_contraction(&theta);
        let svd = m.svd(true, false);
        let sigma1 = svd.singular_values[0];
        let sigma2 = if svd.singular_values.len() > 1 { svd.singular_values[1] } else { 0.0 };
        let u = svd.u.as_ref().expect("U requested");
        let mut vector: DVector<f64> = u.column(0).into();
        let mut lambda = obs.debiased_cubic_form(&vector);
        if lambda < 0.0 {
            vector.neg_mut();
            lambda = -lambda;
        }
        candidates.push(RetrievalCandidate { probe, vector, lambda, gap: (sigma1 - sigma2).max(0.0) });
    }
    // Greedy gap-descending selection with correlation pruning.
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[b]
            .gap
            .partial_cmp(&candidates[a].gap)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut selected: Vec<usize> = Vec::with_capacity(rank);
    for &c in &order {
        if selected.len() == rank {
            break;
        }
        let ok = selected.iter().all(|&s| {
            candidates[c].vector.dot(&candidates[s].vector).abs() <= cfg.correlation_threshold
        });
        if ok {
            selected.push(c);
        }
    }
    if selected.len() < rank {
        return Err(Error::RetrievalFailure { survivors: selected.len(), needed: rank });
    }
    let mut x0 = DMatrix::<f64>::zeros(n, rank);
    for (col, &c) in selected.iter().enumerate() {
        let scale = candidates[c].lambda.cbrt();
        x0.set_column(col, &(&candidates[c].vector * scale));
    }
    Ok(Retrieval { x0, candidates, selected })
}

/// Objective `F(X) = 1/(6q) sum_{omega} (sum_i x_i(a) x_i(b) x_i(c) - T_omega)^2`.
pub fn gd_objective(x: &DMatrix<f64>, obs: &SparseObservations) -> f64 {
    let r = x.ncols();
    let mut total = 0.0;
    for (idx, &t) in obs.indices.iter().zip(&obs.values) {
        let (a, b, c) = (idx[0] as usize, idx[1] as usize, idx[2] as usize);
        let mut fit = 0.0;
        for i in 0..r {
            fit += x[(a, i)] * x[(b, i)] * x[(c, i)];
        }
        let res = fit - t;
        total += res * res;
    }
    total / (6.0 * obs.q)
}

/// Gradient of [`gd_objective`]: with `E = P_Omega(sum_j x_j^{⊗3} - T)`,
/// column `i` is `1/(3q) (E ×_2 x_i ×_3 x_i + E ×_1 x_i ×_3 x_i +
/// E ×_1 x_i ×_2 x_i)`, accumulated sparsely.
pub fn gd_gradient(x: &DMatrix<f64>, obs: &SparseObservations) -> DMatrix<f64> {
    let n = x.nrows();
    let r = x.ncols();
    let mut grad = DMatrix::<f64>::zeros(n, r);
    for (idx, &t) in obs.indices.iter().zip(&obs.values) {
        let (a, b, c) = (idx[0] as usize, idx[1] as usize, idx[2] as usize);
        let mut fit = 0.0;
        for i in 0..r {
            fit += x[(a, i)] * x[(b, i)] * x[(c, i)];
        }
        let e = fit - t;
        for i in 0..r {
            let (xa, xb, xc) = (x[(a, i)], x[(b, i)], x[(c, i)]);
            grad[(a, i)] += e * xb * xc;
            grad[(b, i)] += e * xa * xc;
            grad[(c, i)] += e * xa * xb;
        }
    }
    grad / (3.0 * obs.q)
}

/// Step size `(1/8) lambda_max^{-4/3}`, inside the convergence region
/// `eta <= (1/4) lambda_max^{-4/3}` of the local analysis.
pub fn default_step(lambda_max: f64) -> f64 {
    0.125 * lambda_max.powf(-4.0 / 3.0)
}

/// One row of the gradient-descent error trace.
#[derive(Debug, Clone, Copy)]
pub struct GdTraceRow {
    pub iteration: usize,
    pub objective: f64,
    /// `||T_hat - T||_F / ||T||_F` against the ground truth, when provided.
    pub rel_err_f: Option<f64>,
    /// `||T_hat - T||_inf / ||T||_inf`; computed at the trace stride and at
    /// the final iterate (it costs a full `O(n^3 r)` scan).
    pub rel_err_inf: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GdConfig {
    pub step: f64,
    pub t_max: usize,
    /// Stop when the relative Frobenius change of the iterate drops below
    /// this.
    pub stop_tol: f64,
    /// Stride (in iterations) for the expensive max-norm error; 0 disables
    /// all but the final evaluation.
    pub inf_err_stride: usize,
}

impl GdConfig {
    pub fn new(step: f64) -> Self {
        GdConfig { step, t_max: 500, stop_tol: 1e-12, inf_err_stride: 0 }
    }
}

/// A finished gradient-descent run.
#[derive(Debug, Clone)]
pub struct GdRun {
    pub x: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<GdTraceRow>,
}

impl GdRun {
    pub fn final_objective(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.objective)
    }

    pub fn final_rel_err_f(&self) -> Option<f64> {
        self.trace.last().and_then(|r| r.rel_err_f)
    }

    pub fn final_rel_err_inf(&self) -> Option<f64> {
        self.trace.last().and_then(|r| r.rel_err_inf)
    }
}

/// Relative Frobenius error of the symmetric CP iterate against the model,
/// via the Gram identity `<sum a_i^{⊗3}, sum b_j^{⊗3}> = sum_{ij} <a_i,b_j>^3`.
pub fn rel_err_frobenius(x: &DMatrix<f64>, truth: &CpModel) -> f64 {
    let xt = truth.factor(0);
    let cross = |a: &DMatrix<f64>, b: &DMatrix<f64>| -> f64 {
        let mut acc = 0.0;
        for i in 0..a.ncols() {
            for j in 0..b.ncols() {
                acc += a.column(i).dot(&b.column(j)).powi(3);
            }
        }
        acc
    };
    let t_norm2 = cross(xt, xt);
    let num2 = cross(x, x) - 2.0 * cross(x, xt) + t_norm2;
    (num2.max(0.0) / t_norm2).sqrt()
}

/// Relative max-norm error, by scanning every entry (`O(n^3 r)`).
pub fn rel_err_inf(x: &DMatrix<f64>, truth: &CpModel) -> f64 {
    let n = x.nrows();
    let r = x.ncols();
    let f = truth.factor(0);
    let rt = truth.rank();
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut fit = 0.0;
                for i in 0..r {
                    fit += x[(a, i)] * x[(b, i)] * x[(c, i)];
                }
                let mut t = 0.0;
                for i in 0..rt {
                    t += f[(a, i)] * f[(b, i)] * f[(c, i)];
                }
                num = num.max((fit - t).abs());
                den = den.max(t.abs());
            }
        }
    }
    num / den
}

/// Run gradient descent from `x0`.
///
/// Stops at `t_max` iterations or when the relative Frobenius change of the
/// iterate drops below `stop_tol`. If the objective grows past ten times its
/// running minimum the run aborts with [`Error::Divergence`] naming the
/// iteration. When `truth` is given the trace carries relative errors.
pub fn gd_run(
    x0: &DMatrix<f64>,
    obs: &SparseObservations,
    cfg: &GdConfig,
    truth: Option<&CpModel>,
) -> Result<GdRun> {
    if cfg.step <= 0.0 || !cfg.step.is_finite() {
        return Err(Error::InvalidArgument(format!("step size {} must be positive", cfg.step)));
    }
    let mut x = x0.clone();
    let mut trace = Vec::with_capacity(cfg.t_max + 1);
    let record = |x: &DMatrix<f64>, iteration: usize, f_val: f64, last: bool, trace: &mut Vec<GdTraceRow>| {
        let rel_f = truth.map(|t| rel_err_frobenius(x, t));
        let want_inf =
            last || (cfg.inf_err_stride > 0 && iteration % cfg.inf_err_stride == 0);
        let rel_inf = if want_inf { truth.map(|t| rel_err_inf(x, t)) } else { None };
        trace.push(GdTraceRow { iteration, objective: f_val, rel_err_f: rel_f, rel_err_inf: rel_inf });
    };
    let mut f_val = gd_objective(&x, obs);
    let mut f_min = f_val;
    record(&x, 0, f_val, false, &mut trace);
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=cfg.t_max {
        let grad = gd_gradient(&x, obs);
        let step = &grad * cfg.step;
        x -= &step;
        f_val = gd_objective(&x, obs);
        iterations = t;
        if !f_val.is_finite() || (f_val > 10.0 * f_min && f_val > 1e-300) {
            return Err(Error::Divergence { iteration: t });
        }
        f_min = f_min.min(f_val);
        let x_norm = x.norm();
        let rel_change = if x_norm > 0.0 { step.norm() / x_norm } else { step.norm() };
        let stopping = rel_change < cfg.stop_tol || t == cfg.t_max;
        record(&x, t, f_val, stopping, &mut trace);
        if rel_change < cfg.stop_tol {
            converged = true;
            break;
        }
    }
    Ok(GdRun { x, iterations, converged, trace })
}
