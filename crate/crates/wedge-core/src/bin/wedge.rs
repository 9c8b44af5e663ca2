//! Command-line driver for the experiment harness.
//!
//! Exit codes: 0 success, 1 configuration error, 2 I/O error.
//! `WEDGE_THREADS` overrides `--threads`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wedge_core::error::Error;
use wedge_core::harness::{
    self, aggregate_medians, emit_outputs, read_manifest, run_experiment, ExperimentConfig,
    ExperimentKind,
};

#[derive(Parser)]
#[command(name = "wedge", version, about = "Wedge-sampling tensor completion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// JSON experiment config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per cell override.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (0 = all cores); WEDGE_THREADS takes precedence.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "wedge-out")]
    out_dir: PathBuf,
    /// Emit SVG plots.
    #[arg(long)]
    plots: bool,
    /// Record real wall-clock times in the CSV (breaks byte-for-byte
    /// reproducibility of reruns).
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Subspace recovery: wedge estimator vs the hollowed-Gram uniform
    /// baseline.
    Subspace(RunFlags),
    /// Spectral completion with both initializations.
    Spectral(RunFlags),
    /// Gradient-descent completion with both initializations.
    Gd(RunFlags),
    /// Sparse-deviation concentration probe in the delta norm.
    DeltaProbe(RunFlags),
    /// Re-run an experiment from its manifest.
    Replay {
        /// Path to a manifest.json from a previous run.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "wedge-out")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Format { .. } => 2,
        _ => 1,
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Subspace(flags) => run_kind(ExperimentKind::Subspace, flags),
        Command::Spectral(flags) => run_kind(ExperimentKind::Spectral, flags),
        Command::Gd(flags) => run_kind(ExperimentKind::Gd, flags),
        Command::DeltaProbe(flags) => run_kind(ExperimentKind::DeltaProbe, flags),
        Command::Replay { manifest, out_dir } => {
            let m = read_manifest(&manifest)?;
            let recomputed = harness::config_hash(&m.config)?;
            if recomputed != m.config_hash {
                return Err(Error::InvalidArgument(format!(
                    "manifest hash {} does not match its config ({})",
                    m.config_hash, recomputed
                )));
            }
            run_and_emit(m.config, &out_dir)
        }
    }
}

fn run_kind(kind: ExperimentKind, flags: RunFlags) -> Result<(), Error> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
            cfg.kind = kind;
            cfg
        }
        None => default_config(kind),
    };
    if let Some(seed) = flags.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = flags.trials {
        cfg.trials = trials;
    }
    if let Some(threads) = flags.threads {
        cfg.threads = threads;
    }
    if let Ok(value) = std::env::var("WEDGE_THREADS") {
        cfg.threads = value
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("WEDGE_THREADS = {value:?}")))?;
    }
    cfg.plots |= flags.plots;
    cfg.timing |= flags.timing;
    run_and_emit(cfg, &flags.out_dir)
}

fn run_and_emit(cfg: ExperimentConfig, out_dir: &PathBuf) -> Result<(), Error> {
    cfg.validate()?;
    let output = run_experiment(&cfg)?;
    let emitted = emit_outputs(&output, &cfg, out_dir)?;
    println!("wrote {}", emitted.results_csv.display());
    println!("wrote {}", emitted.medians_csv.display());
    if let Some(traces) = &emitted.traces_csv {
        println!("wrote {}", traces.display());
    }
    println!("wrote {}", emitted.manifest.display());
    for plot in &emitted.plots {
        println!("wrote {}", plot.display());
    }
    for m in aggregate_medians(&output.rows) {
        println!(
            "median {} n={} r={} s={:?} {} {} = {:?} ({} trials, {} failed)",
            m.experiment, m.n, m.r, m.s, m.scheme, m.metric, m.median, m.trials, m.failures
        );
    }
    Ok(())
}

fn default_config(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind);
    match kind {
        ExperimentKind::Subspace => {
            cfg.n_grid = vec![100];
            cfg.r_grid = vec![1, 2];
            cfg.s_grid = vec![1.5, 1.75];
        }
        ExperimentKind::Spectral => {
            cfg.n_grid = vec![50];
            cfg.r_grid = vec![2];
            cfg.s_grid = vec![1.5];
            cfg.trials = 10;
        }
        ExperimentKind::Gd => {
            cfg.n_grid = vec![50];
            cfg.r_grid = vec![1];
            cfg.s_grid = vec![1.0, 1.25, 1.5];
            cfg.trials = 10;
        }
        ExperimentKind::DeltaProbe => {
            cfg.n_grid = vec![40];
            cfg.r_grid = vec![2];
            cfg.s_grid = vec![];
        }
    }
    cfg
}
