//! Experiment harness: seeded trial sweeps over `(n, r, budget exponent)`,
//! wedge-vs-uniform A/B comparisons, median aggregation, and CSV/manifest
//! emission.
//!
//! Sampling rates follow the sweep convention
//!
//! ```text
//! p_wedge   = c * ln(n) / n^{s+1}      (wedge space of the unfolding)
//! p_uniform = c * ln(n) / n^{s}        (entries of the unfolding)
//! ```
//!
//! so both schemes consume the same expected entry-observation budget,
//! roughly `c * ln(n) * n^{k-s}` for an order-k cube. Smaller `s` means more
//! samples. Every trial draws its random streams from
//! `(master_seed, cell, trial, role)` labels, so results are independent of
//! scheduling order and the CSV is byte-reproducible from `(config, seed)`.

mod baseline;
mod gd_sweep;
mod output;
mod spectral_sweep;
mod subspace_sweep;

pub use baseline::hollowed_gram_subspace;
pub use output::{
    config_hash, emit_outputs, read_manifest, render_plots, rows_to_csv, write_manifest,
    EmittedFiles, Manifest,
};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Which experiment a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Subspace,
    Spectral,
    Gd,
    DeltaProbe,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Subspace => "subspace",
            ExperimentKind::Spectral => "spectral",
            ExperimentKind::Gd => "gd",
            ExperimentKind::DeltaProbe => "delta_probe",
        }
    }
}

/// Sampling scheme of one experiment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Wedge,
    Uniform,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Wedge => "wedge",
            Scheme::Uniform => "uniform",
        }
    }
}

fn default_trials() -> usize {
    20
}

fn default_rate_constant() -> f64 {
    8.0
}

fn default_order() -> usize {
    3
}

fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::Wedge, Scheme::Uniform]
}

fn default_q_factors() -> Vec<f64> {
    vec![4.0, 16.0, 64.0]
}

fn default_q_constant() -> f64 {
    4.0
}

/// Gradient-descent sweep parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GdParams {
    #[serde(default = "GdParams::default_t_max")]
    pub t_max: usize,
    /// Step size = `eta_factor * lambda_max^{-4/3}` from the retrieved
    /// weights.
    #[serde(default = "GdParams::default_eta_factor")]
    pub eta_factor: f64,
    /// Probe count; `None` uses the rank-dependent default.
    #[serde(default)]
    pub probes: Option<usize>,
    #[serde(default = "GdParams::default_stop_tol")]
    pub stop_tol: f64,
    /// Emit per-iteration traces to `gd_traces.csv`.
    #[serde(default = "GdParams::default_emit_traces")]
    pub emit_traces: bool,
    /// Stride for the max-norm trace error (0 = final iterate only).
    #[serde(default)]
    pub inf_err_stride: usize,
}

impl GdParams {
    fn default_t_max() -> usize {
        500
    }
    fn default_eta_factor() -> f64 {
        0.125
    }
    fn default_stop_tol() -> f64 {
        1e-12
    }
    fn default_emit_traces() -> bool {
        true
    }
}

impl Default for GdParams {
    fn default() -> Self {
        GdParams {
            t_max: Self::default_t_max(),
            eta_factor: Self::default_eta_factor(),
            probes: None,
            stop_tol: Self::default_stop_tol(),
            emit_traces: Self::default_emit_traces(),
            inf_err_stride: 0,
        }
    }
}

/// Delta-probe sweep parameters (the sampling grid is explicit here).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeParams {
    #[serde(default = "ProbeParams::default_q_grid")]
    pub q_grid: Vec<f64>,
    #[serde(default = "ProbeParams::default_restarts")]
    pub restarts: usize,
    #[serde(default = "ProbeParams::default_iters")]
    pub iters: usize,
    /// Delocalization parameter; `None` measures CP incoherence.
    #[serde(default)]
    pub mu: Option<f64>,
}

impl ProbeParams {
    fn default_q_grid() -> Vec<f64> {
        vec![0.002, 0.008, 0.032]
    }
    fn default_restarts() -> usize {
        8
    }
    fn default_iters() -> usize {
        200
    }
}

impl Default for ProbeParams {
    fn default() -> Self {
        ProbeParams {
            q_grid: Self::default_q_grid(),
            restarts: Self::default_restarts(),
            iters: Self::default_iters(),
            mu: None,
        }
    }
}

/// A full experiment description; serializable so runs can be replayed from
/// their manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n_grid: Vec<usize>,
    pub r_grid: Vec<usize>,
    /// Budget exponents `s`.
    pub s_grid: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Tensor order (symmetric cube models).
    #[serde(default = "default_order")]
    pub order: usize,
    /// Constant `c` in the sampling rates.
    #[serde(default = "default_rate_constant")]
    pub rate_constant: f64,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    /// Held-out evaluation entries when the estimate cannot be
    /// materialized; `None` means `n^2`.
    #[serde(default)]
    pub eval_subset: Option<usize>,
    /// Denoising-rate multipliers over the base rate `q0 = q_constant *
    /// (k-1) ln(n) / n^k` (spectral experiment).
    #[serde(default = "default_q_factors")]
    pub q_factors: Vec<f64>,
    #[serde(default = "default_q_constant")]
    pub q_constant: f64,
    #[serde(default)]
    pub gd: GdParams,
    #[serde(default)]
    pub probe: ProbeParams,
    /// Worker threads (0 = all available).
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub plots: bool,
    /// Record real wall-clock times in the CSV. Off by default so reruns of
    /// the same `(config, seed)` are byte-identical; timings then read 0.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            n_grid: vec![],
            r_grid: vec![],
            s_grid: vec![],
            trials: default_trials(),
            master_seed: 0,
            order: default_order(),
            rate_constant: default_rate_constant(),
            schemes: default_schemes(),
            eval_subset: None,
            q_factors: default_q_factors(),
            q_constant: default_q_constant(),
            gd: GdParams::default(),
            probe: ProbeParams::default(),
            threads: 0,
            plots: false,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be >= 1".into()));
        }
        if self.order < 2 || self.order > 5 {
            return Err(Error::InvalidArgument(format!("order {} out of range", self.order)));
        }
        let needs_grids = !matches!(self.kind, ExperimentKind::DeltaProbe);
        if needs_grids && (self.n_grid.is_empty() || self.r_grid.is_empty() || self.s_grid.is_empty())
        {
            return Err(Error::InvalidArgument("empty n/r/s grid".into()));
        }
        if self.kind == ExperimentKind::DeltaProbe
            && (self.n_grid.is_empty() || self.r_grid.is_empty())
        {
            return Err(Error::InvalidArgument("delta probe needs n and r".into()));
        }
        if self.rate_constant <= 0.0 {
            return Err(Error::InvalidArgument("rate constant must be positive".into()));
        }
        Ok(())
    }

    /// Wedge rate `min(1, c ln n / n^{s+1})`.
    pub fn wedge_rate(&self, n: usize, s: f64) -> f64 {
        let n = n as f64;
        (self.rate_constant * n.ln() / n.powf(s + 1.0)).min(1.0)
    }

    /// Uniform entry rate `min(1, c ln n / n^s)`.
    pub fn uniform_rate(&self, n: usize, s: f64) -> f64 {
        let n = n as f64;
        (self.rate_constant * n.ln() / n.powf(s)).min(1.0)
    }

    /// Base denoising rate `q0 = q_constant (k-1) ln n / n^k`, clamped to 1.
    pub fn q_base(&self, n: usize) -> f64 {
        let k = self.order as f64;
        let n = n as f64;
        (self.q_constant * (k - 1.0) * n.ln() / n.powf(k)).min(1.0)
    }
}

/// One measurement row of the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub n: usize,
    pub r: usize,
    pub s: f64,
    pub scheme: String,
    pub trial: usize,
    pub seed: u64,
    pub samples: u64,
    pub metric: String,
    pub value: f64,
    pub wall_ms: u64,
    /// Empty when the trial succeeded; otherwise a short failure code
    /// (failures are data, not crashes).
    pub failure_code: String,
}

/// CSV header of the results file.
pub const CSV_HEADER: &str = "experiment,n,r,s,scheme,trial,seed,samples,metric,value,wall_ms,failure_code";

impl ResultRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:?},{},{},{},{},{},{:?},{},{}",
            self.experiment,
            self.n,
            self.r,
            self.s,
            self.scheme,
            self.trial,
            self.seed,
            self.samples,
            self.metric,
            self.value,
            self.wall_ms,
            self.failure_code
        )
    }

    fn sort_key(&self) -> (String, usize, usize, u64, String, usize, String) {
        (
            self.experiment.clone(),
            self.n,
            self.r,
            self.s.to_bits(),
            self.scheme.clone(),
            self.trial,
            self.metric.clone(),
        )
    }
}

/// Sort rows into the canonical emission order.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// A per-iteration gradient-descent trace row (written to `gd_traces.csv`).
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub n: usize,
    pub r: usize,
    pub s: f64,
    pub scheme: String,
    pub trial: usize,
    pub iteration: usize,
    pub objective: f64,
    pub rel_err_f: f64,
    pub rel_err_inf: f64,
}

pub const TRACE_HEADER: &str = "n,r,s,scheme,trial,iteration,objective,rel_err_f,rel_err_inf";

impl TraceRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{:?},{},{},{},{:?},{:?},{:?}",
            self.n,
            self.r,
            self.s,
            self.scheme,
            self.trial,
            self.iteration,
            self.objective,
            self.rel_err_f,
            self.rel_err_inf
        )
    }
}

/// Everything an experiment produces before hitting the filesystem.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub traces: Vec<TraceRow>,
}

/// Median of one (cell, scheme, metric) group.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianRow {
    pub experiment: String,
    pub n: usize,
    pub r: usize,
    pub s: f64,
    pub scheme: String,
    pub metric: String,
    pub median: f64,
    pub trials: usize,
    pub failures: usize,
    pub median_samples: f64,
}

/// Aggregate medians over trials for each (cell, scheme, metric) group.
/// Failed trials (NaN values) are excluded from the median but counted.
pub fn aggregate_medians(rows: &[ResultRow]) -> Vec<MedianRow> {
    use std::collections::BTreeMap;
    type Key = (String, usize, usize, u64, String, String);
    let mut groups: BTreeMap<Key, Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        let key = (
            row.experiment.clone(),
            row.n,
            row.r,
            row.s.to_bits(),
            row.scheme.clone(),
            row.metric.clone(),
        );
        groups.entry(key).or_default().push(row);
    }
    groups
        .into_iter()
        .map(|((experiment, n, r, s_bits, scheme, metric), rows)| {
            let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
            let samples: Vec<f64> = rows
                .iter()
                .filter(|r| r.failure_code.is_empty())
                .map(|r| r.samples as f64)
                .collect();
            let failures = rows.iter().filter(|r| !r.failure_code.is_empty()).count();
            MedianRow {
                experiment,
                n,
                r,
                s: f64::from_bits(s_bits),
                scheme,
                metric,
                median: stats::median(&values),
                trials: rows.len(),
                failures,
                median_samples: stats::median(&samples),
            }
        })
        .collect()
}

/// Run the configured experiment and collect all rows.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| match cfg.kind {
        ExperimentKind::Subspace => subspace_sweep::run(cfg),
        ExperimentKind::Spectral => spectral_sweep::run(cfg),
        ExperimentKind::Gd => gd_sweep::run(cfg),
        ExperimentKind::DeltaProbe => run_delta_probe(cfg),
    })
}

/// Delta-probe experiment: thin wrapper around
/// [`crate::delta_norm::concentration_probe`] producing harness rows.
fn run_delta_probe(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let n = cfg.n_grid[0];
    let r = cfg.r_grid[0];
    let model = crate::tensor::CpModel::random_gaussian_symmetric(
        n,
        r,
        cfg.order,
        crate::rng::derive_seed(cfg.master_seed, &[90]),
    )?;
    let probe_cfg = crate::delta_norm::ProbeConfig {
        q_grid: cfg.probe.q_grid.clone(),
        trials: cfg.trials,
        restarts: cfg.probe.restarts,
        iters: cfg.probe.iters,
        master_seed: crate::rng::derive_seed(cfg.master_seed, &[91]),
        mu: cfg.probe.mu,
    };
    let table = crate::delta_norm::concentration_probe(&model, &probe_cfg)?;
    let mut rows = Vec::new();
    for row in &table.rows {
        let samples = (row.q * (n as f64).powi(cfg.order as i32)).round() as u64;
        for (metric, value) in
            [("delta_norm_dev", row.delta_norm), ("op_norm_dev", row.op_norm)]
        {
            rows.push(ResultRow {
                experiment: "delta_probe".into(),
                n,
                r,
                s: row.q,
                scheme: "uniform".into(),
                trial: row.trial,
                seed: probe_cfg.master_seed,
                samples,
                metric: metric.into(),
                value,
                wall_ms: 0,
                failure_code: String::new(),
            });
        }
    }
    sort_rows(&mut rows);
    Ok(ExperimentOutput { rows, traces: vec![] })
}

/// Standard output paths inside an output directory.
#[derive(Debug, Clone)]
pub struct OutputPaths {
    pub dir: PathBuf,
    pub results_csv: PathBuf,
    pub medians_csv: PathBuf,
    pub traces_csv: PathBuf,
    pub manifest: PathBuf,
}

impl OutputPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        let dir = dir.into();
        OutputPaths {
            results_csv: dir.join("results.csv"),
            medians_csv: dir.join("medians.csv"),
            traces_csv: dir.join("gd_traces.csv"),
            manifest: dir.join("manifest.json"),
            dir,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_is_rejected() {
        let cfg = ExperimentConfig::new(ExperimentKind::Subspace);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rates_follow_the_sweep_convention() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Subspace);
        cfg.rate_constant = 8.0;
        let n = 100;
        let s = 1.5;
        let ln_n = (n as f64).ln();
        assert!((cfg.wedge_rate(n, s) - 8.0 * ln_n / (n as f64).powf(2.5)).abs() < 1e-15);
        assert!((cfg.uniform_rate(n, s) - 8.0 * ln_n / (n as f64).powf(1.5)).abs() < 1e-15);
        // Rates clamp at 1.
        assert_eq!(cfg.wedge_rate(2, -10.0), 1.0);
    }

    #[test]
    fn medians_match_independent_recomputation() {
        let mk = |trial: usize, value: f64| ResultRow {
            experiment: "subspace".into(),
            n: 10,
            r: 1,
            s: 1.5,
            scheme: "wedge".into(),
            trial,
            seed: 0,
            samples: 100,
            metric: "err".into(),
            value,
            wall_ms: 0,
            failure_code: String::new(),
        };
        let rows: Vec<ResultRow> = (0..5).map(|t| mk(t, (5 - t) as f64)).collect();
        let med = aggregate_medians(&rows);
        assert_eq!(med.len(), 1);
        // values 5,4,3,2,1 -> median 3.
        assert_eq!(med[0].median, 3.0);
        assert_eq!(med[0].trials, 5);
        assert_eq!(med[0].failures, 0);
    }

    #[test]
    fn row_sorting_is_total_and_stable_under_shuffle() {
        let mk = |n: usize, trial: usize, metric: &str| ResultRow {
            experiment: "gd".into(),
            n,
            r: 1,
            s: 1.0,
            scheme: "wedge".into(),
            trial,
            seed: 0,
            samples: 0,
            metric: metric.into(),
            value: 0.0,
            wall_ms: 0,
            failure_code: String::new(),
        };
        let mut a = vec![mk(20, 1, "x"), mk(10, 0, "y"), mk(10, 0, "x"), mk(10, 1, "x")];
        let mut b = vec![mk(10, 0, "x"), mk(10, 1, "x"), mk(20, 1, "x"), mk(10, 0, "y")];
        sort_rows(&mut a);
        sort_rows(&mut b);
        assert_eq!(a, b);
    }
}
