//! Gradient-descent sweep: wedge-initialized against uniform-initialized
//! descent at matched budgets, with per-iteration error traces.
//!
//! Both arms share the refinement sample `Omega` (rate `c ln n / n^s`); the
//! wedge arm builds its initializer from wedges at `c ln n / n^{s+1}` while
//! the uniform arm spends an equal extra budget of uniform entries on the
//! hollowed-Gram initializer, so total budgets match.

use rayon::prelude::*;

use super::subspace_sweep::failure_code;
use super::{baseline, ExperimentConfig, ExperimentOutput, ResultRow, Scheme, TraceRow};
use crate::error::Result;
use crate::gd::{gd_run, retrieve_cp_factors, GdConfig, RetrievalConfig, SparseObservations};
use crate::rng;
use crate::sampling::{build_wedge_matrix, sample_uniform, sample_wedges};
use crate::spectral::{top_r_eigs, EigOrdering};
use crate::tensor::{unfold_cp, CpModel};

const MODEL_LABEL: u64 = 30;
const TRIAL_LABEL: u64 = 31;
const OMEGA_LABEL: u64 = 32;
const PROBE_LABEL: u64 = 33;

pub(super) fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.order != 3 {
        return Err(crate::error::Error::InvalidArgument(
            "the gradient-descent sweep supports order-3 symmetric tensors".into(),
        ));
    }
    let mut cells = Vec::new();
    for &n in &cfg.n_grid {
        for &r in &cfg.r_grid {
            for &s in &cfg.s_grid {
                cells.push((n, r, s));
            }
        }
    }
    let outputs: Vec<(Vec<ResultRow>, Vec<TraceRow>)> = cells
        .par_iter()
        .enumerate()
        .map(|(cell_id, &(n, r, s))| run_cell(cfg, cell_id as u64, n, r, s))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for (r, t) in outputs {
        rows.extend(r);
        traces.extend(t);
    }
    super::sort_rows(&mut rows);
    traces.sort_by(|a, b| {
        (a.n, a.r, a.s.to_bits(), a.scheme.clone(), a.trial, a.iteration).cmp(&(
            b.n,
            b.r,
            b.s.to_bits(),
            b.scheme.clone(),
            b.trial,
            b.iteration,
        ))
    });
    Ok(ExperimentOutput { rows, traces })
}

fn run_cell(
    cfg: &ExperimentConfig,
    cell_id: u64,
    n: usize,
    r: usize,
    s: f64,
) -> Result<(Vec<ResultRow>, Vec<TraceRow>)> {
    let model_seed = rng::derive_seed(cfg.master_seed, &[MODEL_LABEL, cell_id]);
    let model = CpModel::random_gaussian_symmetric(n, r, 3, model_seed)?;
    let per_trial: Vec<(Vec<ResultRow>, Vec<TraceRow>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| run_trial(cfg, &model, cell_id, n, r, s, trial))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for (r, t) in per_trial {
        rows.extend(r);
        traces.extend(t);
    }
    Ok((rows, traces))
}

fn run_trial(
    cfg: &ExperimentConfig,
    model: &CpModel,
    cell_id: u64,
    n: usize,
    r: usize,
    s: f64,
    trial: usize,
) -> Result<(Vec<ResultRow>, Vec<TraceRow>)> {
    let q = cfg.uniform_rate(n, s);
    let omega_seed = rng::derive_seed(cfg.master_seed, &[OMEGA_LABEL, cell_id, trial as u64]);
    let omega = sample_uniform(model.dims(), q, omega_seed)?;
    let obs = SparseObservations::gather(&omega, model)?;
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for &scheme in &cfg.schemes {
        let seed = rng::derive_seed(
            cfg.master_seed,
            &[TRIAL_LABEL, cell_id, trial as u64, scheme as u64],
        );
        let started = std::time::Instant::now();
        let outcome = run_arm(cfg, model, &obs, scheme, n, r, s, seed, cell_id, trial);
        let wall_ms = if cfg.timing { started.elapsed().as_millis() as u64 } else { 0 };
        match outcome {
            Ok(arm) => {
                let samples = arm.init_samples + obs.len() as u64;
                for (metric, value) in [
                    ("gd_final_rel_err_f", arm.final_rel_err_f),
                    ("gd_final_rel_err_inf", arm.final_rel_err_inf),
                    ("gd_iterations", arm.iterations as f64),
                ] {
                    rows.push(ResultRow {
                        experiment: "gd".into(),
                        n,
                        r,
                        s,
                        scheme: scheme.name().into(),
                        trial,
                        seed,
                        samples,
                        metric: metric.into(),
                        value,
                        wall_ms,
                        failure_code: String::new(),
                    });
                }
                if cfg.gd.emit_traces {
                    traces.extend(arm.trace.into_iter().map(|t| TraceRow {
                        n,
                        r,
                        s,
                        scheme: scheme.name().into(),
                        trial,
                        iteration: t.iteration,
                        objective: t.objective,
                        rel_err_f: t.rel_err_f.unwrap_or(f64::NAN),
                        rel_err_inf: t.rel_err_inf.unwrap_or(f64::NAN),
                    }));
                }
            }
            Err(e) => {
                rows.push(ResultRow {
                    experiment: "gd".into(),
                    n,
                    r,
                    s,
                    scheme: scheme.name().into(),
                    trial,
                    seed,
                    samples: obs.len() as u64,
                    metric: "gd_final_rel_err_f".into(),
                    value: f64::NAN,
                    wall_ms,
                    failure_code: failure_code(&e),
                });
            }
        }
    }
    Ok((rows, traces))
}

struct ArmOutcome {
    init_samples: u64,
    iterations: usize,
    final_rel_err_f: f64,
    final_rel_err_inf: f64,
    trace: Vec<crate::gd::GdTraceRow>,
}

#[allow(clippy::too_many_arguments)]
fn run_arm(
    cfg: &ExperimentConfig,
    model: &CpModel,
    obs: &SparseObservations,
    scheme: Scheme,
    n: usize,
    r: usize,
    s: f64,
    seed: u64,
    cell_id: u64,
    trial: usize,
) -> Result<ArmOutcome> {
    let unfolding = unfold_cp(model, 0)?;
    let (basis, init_samples) = match scheme {
        Scheme::Wedge => {
            let p = cfg.wedge_rate(n, s);
            let wedges = sample_wedges(n, unfolding.column_map().num_cols(), p, seed)?;
            let z = build_wedge_matrix(&unfolding, &wedges)?;
            let est = top_r_eigs(&z.z, r, EigOrdering::Signed)?;
            (est.basis, z.entry_observations())
        }
        Scheme::Uniform => {
            let p = cfg.uniform_rate(n, s);
            let (est, samples) =
                baseline::hollowed_gram_subspace(&unfolding, p, r, seed, EigOrdering::Signed)?;
            (est.basis, samples)
        }
    };
    let retrieval_cfg = RetrievalConfig {
        probes: cfg.gd.probes.unwrap_or_else(|| crate::gd::default_probes(r)),
        correlation_threshold: 0.5,
        seed: rng::derive_seed(
            cfg.master_seed,
            &[PROBE_LABEL, cell_id, trial as u64, scheme as u64],
        ),
    };
    let retrieval = retrieve_cp_factors(&basis, obs, r, &retrieval_cfg)?;
    let lambda_max = retrieval
        .selected
        .iter()
        .map(|&i| retrieval.candidates[i].lambda)
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut gd_cfg = GdConfig::new(cfg.gd.eta_factor * lambda_max.powf(-4.0 / 3.0));
    gd_cfg.t_max = cfg.gd.t_max;
    gd_cfg.stop_tol = cfg.gd.stop_tol;
    gd_cfg.inf_err_stride = cfg.gd.inf_err_stride;
    let run = gd_run(&retrieval.x0, obs, &gd_cfg, Some(model))?;
    Ok(ArmOutcome {
        init_samples,
        iterations: run.iterations,
        final_rel_err_f: run.final_rel_err_f().unwrap_or(f64::NAN),
        final_rel_err_inf: run.final_rel_err_inf().unwrap_or(f64::NAN),
        trace: run.trace,
    })
}
