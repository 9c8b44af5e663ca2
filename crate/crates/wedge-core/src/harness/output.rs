//! CSV, manifest, and SVG emission for experiment runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    aggregate_medians, ExperimentConfig, ExperimentOutput, MedianRow, OutputPaths, ResultRow,
    CSV_HEADER, TRACE_HEADER,
};
use crate::error::{Error, Result};

/// Render result rows as the canonical CSV document (header + LF lines).
pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

fn medians_to_csv(medians: &[MedianRow]) -> String {
    let mut out = String::new();
    out.push_str("experiment,n,r,s,scheme,metric,median,trials,failures,median_samples\n");
    for m in medians {
        let _ = writeln!(
            out,
            "{},{},{},{:?},{},{},{:?},{},{},{:?}",
            m.experiment,
            m.n,
            m.r,
            m.s,
            m.scheme,
            m.metric,
            m.median,
            m.trials,
            m.failures,
            m.median_samples
        );
    }
    out
}

/// The run manifest: enough to reproduce the run bit for bit.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub master_seed: u64,
    /// SHA-256 of the canonical (serde_json) config encoding.
    pub config_hash: String,
    pub config: ExperimentConfig,
}

pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let canonical = serde_json::to_string(cfg)?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    Ok(hex_string(&hasher.finalize()))
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{:02x}", b);
    }
    s
}

pub fn write_manifest(path: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let manifest = Manifest {
        tool: "wedge".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        master_seed: cfg.master_seed,
        config_hash: config_hash(cfg)?,
        config: cfg.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let json =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&json)?)
}

/// Files written by [`emit_outputs`].
#[derive(Debug, Clone)]
pub struct EmittedFiles {
    pub results_csv: PathBuf,
    pub medians_csv: PathBuf,
    pub traces_csv: Option<PathBuf>,
    pub manifest: PathBuf,
    pub plots: Vec<PathBuf>,
}

/// Write results, medians, traces (when present), the manifest, and optional
/// SVG plots under `out_dir`.
pub fn emit_outputs(
    output: &ExperimentOutput,
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<EmittedFiles> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let paths = OutputPaths::new(out_dir);
    fs::write(&paths.results_csv, rows_to_csv(&output.rows))
        .map_err(|e| Error::io(paths.results_csv.display().to_string(), e))?;
    let medians = aggregate_medians(&output.rows);
    fs::write(&paths.medians_csv, medians_to_csv(&medians))
        .map_err(|e| Error::io(paths.medians_csv.display().to_string(), e))?;
    let traces_csv = if output.traces.is_empty() {
        None
    } else {
        let mut text = String::from(TRACE_HEADER);
        text.push('\n');
        for t in &output.traces {
            text.push_str(&t.csv_line());
            text.push('\n');
        }
        fs::write(&paths.traces_csv, text)
            .map_err(|e| Error::io(paths.traces_csv.display().to_string(), e))?;
        Some(paths.traces_csv.clone())
    };
    write_manifest(&paths.manifest, cfg)?;
    let plots = if cfg.plots { render_plots(&medians, out_dir)? } else { Vec::new() };
    Ok(EmittedFiles {
        results_csv: paths.results_csv,
        medians_csv: paths.medians_csv,
        traces_csv,
        manifest: paths.manifest,
        plots,
    })
}

/// Minimal static SVG rendering: one log-log median line chart per
/// (experiment, metric) with a series per (n, r, scheme), plus a heatmap of
/// medians over (r, s) per scheme for the subspace experiment.
pub fn render_plots(medians: &[MedianRow], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut metrics: Vec<(String, String)> = medians
        .iter()
        .map(|m| (m.experiment.clone(), m.metric.clone()))
        .collect();
    metrics.sort();
    metrics.dedup();
    for (experiment, metric) in metrics {
        let rows: Vec<&MedianRow> = medians
            .iter()
            .filter(|m| m.experiment == experiment && m.metric == metric)
            .collect();
        let path = out_dir.join(format!("{}_{}.svg", experiment, metric));
        let svg = line_chart(&rows, &format!("{} / {}", experiment, metric));
        fs::write(&path, svg).map_err(|e| Error::io(path.display().to_string(), e))?;
        written.push(path);
        if experiment == "subspace" {
            for scheme in ["wedge", "uniform"] {
                let cells: Vec<&MedianRow> =
                    rows.iter().filter(|m| m.scheme == scheme).cloned().collect();
                if cells.is_empty() {
                    continue;
                }
                let path = out_dir.join(format!("{}_{}_heatmap_{}.svg", experiment, metric, scheme));
                let svg = heatmap(&cells, &format!("{} medians ({})", metric, scheme));
                fs::write(&path, svg).map_err(|e| Error::io(path.display().to_string(), e))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn line_chart(rows: &[&MedianRow], title: &str) -> String {
    let (w, h, ml, mb) = (640.0, 420.0, 70.0, 50.0);
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for row in rows {
        if !(row.median_samples > 0.0 && row.median > 0.0) {
            continue;
        }
        let key = format!("n={} r={} {}", row.n, row.r, row.scheme);
        let pt = (row.median_samples, row.median);
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, pts)) => pts.push(pt),
            None => series.push((key, vec![pt])),
        }
    }
    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().cloned()).collect();
    let mut svg = svg_open(w, h, title);
    if all.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let (x_lo, x_hi) = log_range(all.iter().map(|p| p.0));
    let (y_lo, y_hi) = log_range(all.iter().map(|p| p.1));
    let map_x = |v: f64| ml + (v.ln() - x_lo) / (x_hi - x_lo).max(1e-12) * (w - ml - 20.0);
    let map_y = |v: f64| (h - mb) - (v.ln() - y_lo) / (y_hi - y_lo).max(1e-12) * (h - mb - 40.0);
    axes(&mut svg, w, h, ml, mb, "median samples (log)", "median value (log)");
    for (si, (label, mut pts)) in series.into_iter().enumerate() {
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let color = PALETTE[si % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                format!("{}{:.2},{:.2}", if i == 0 { "M" } else { "L" }, map_x(x), map_y(y))
            })
            .collect();
        let _ = write!(
            svg,
            "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            path.join(" "),
            color
        );
        for &(x, y) in &pts {
            let _ = write!(
                svg,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>\n",
                map_x(x),
                map_y(y),
                color
            );
        }
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{}\">{}</text>\n",
            w - 180.0,
            30.0 + 14.0 * si as f64,
            color,
            xml_escape(&label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn heatmap(rows: &[&MedianRow], title: &str) -> String {
    let mut rs: Vec<usize> = rows.iter().map(|m| m.r).collect();
    rs.sort_unstable();
    rs.dedup();
    let mut ss: Vec<u64> = rows.iter().map(|m| m.s.to_bits()).collect();
    ss.sort_unstable();
    ss.dedup();
    let (cell, ml, mt) = (40.0, 80.0, 50.0);
    let w = ml + cell * ss.len() as f64 + 40.0;
    let h = mt + cell * rs.len() as f64 + 60.0;
    let mut svg = svg_open(w, h, title);
    let vmax = rows.iter().map(|m| m.median).fold(0.0f64, |a, v| if v.is_finite() { a.max(v) } else { a });
    for (yi, &r) in rs.iter().enumerate() {
        for (xi, &s_bits) in ss.iter().enumerate() {
            let m = rows.iter().find(|m| m.r == r && m.s.to_bits() == s_bits);
            let (color, text) = match m {
                Some(m) if m.median.is_finite() => {
                    let t = if vmax > 0.0 { (m.median / vmax).clamp(0.0, 1.0) } else { 0.0 };
                    (heat_color(t), format!("{:.2}", m.median))
                }
                _ => ("#cccccc".to_string(), "-".to_string()),
            };
            let x = ml + cell * xi as f64;
            let y = mt + cell * yi as f64;
            let _ = write!(
                svg,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell}\" height=\"{cell}\" fill=\"{color}\" stroke=\"#fff\"/>\n<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"9\" text-anchor=\"middle\" fill=\"#000\">{text}</text>\n",
                x + cell / 2.0,
                y + cell / 2.0 + 3.0,
            );
        }
        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">r={}</text>\n",
            ml - 6.0,
            mt + cell * yi as f64 + cell / 2.0 + 3.0,
            r
        );
    }
    for (xi, &s_bits) in ss.iter().enumerate() {
        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">s={}</text>\n",
            ml + cell * xi as f64 + cell / 2.0,
            mt + cell * rs.len() as f64 + 16.0,
            f64::from_bits(s_bits)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn heat_color(t: f64) -> String {
    // Blue (low) to red (high).
    let r = (255.0 * t) as u8;
    let b = (255.0 * (1.0 - t)) as u8;
    let g = (120.0 * (1.0 - (2.0 * t - 1.0).abs())) as u8;
    format!("#{:02x}{:02x}{:02x}", r, g, b)
}

fn log_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for v in values {
        if v > 0.0 {
            lo = lo.min(v.ln());
            hi = hi.max(v.ln());
        }
    }
    if lo > hi {
        (0.0, 1.0)
    } else if (hi - lo) < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn svg_open(w: f64, h: f64, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>\n<text x=\"{}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        w / 2.0,
        xml_escape(title)
    )
}

fn axes(svg: &mut String, w: f64, h: f64, ml: f64, mb: f64, x_label: &str, y_label: &str) {
    let _ = write!(
        svg,
        "<line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"#333\"/>\n<line x1=\"{ml}\" y1=\"40\" x2=\"{ml}\" y2=\"{0}\" stroke=\"#333\"/>\n<text x=\"{2}\" y=\"{3}\" font-size=\"11\" text-anchor=\"middle\">{4}</text>\n<text x=\"16\" y=\"{5}\" font-size=\"11\" transform=\"rotate(-90 16 {5})\" text-anchor=\"middle\">{6}</text>\n",
        h - mb,
        w - 20.0,
        (ml + w - 20.0) / 2.0,
        h - mb + 34.0,
        xml_escape(x_label),
        (h - mb + 40.0) / 2.0,
        xml_escape(y_label)
    );
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ExperimentKind;

    fn sample_row() -> ResultRow {
        ResultRow {
            experiment: "subspace".into(),
            n: 10,
            r: 1,
            s: 1.5,
            scheme: "wedge".into(),
            trial: 0,
            seed: 42,
            samples: 100,
            metric: "subspace_err".into(),
            value: 0.25,
            wall_ms: 0,
            failure_code: String::new(),
        }
    }

    #[test]
    fn csv_has_exact_header_and_one_line_per_row() {
        let rows = vec![sample_row(), sample_row(), sample_row()];
        let csv = rows_to_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "experiment,n,r,s,scheme,trial,seed,samples,metric,value,wall_ms,failure_code"
        );
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.ends_with('\n'));
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "subspace,10,1,1.5,wedge,0,42,100,subspace_err,0.25,0,"
        );
    }

    #[test]
    fn empty_rows_mean_header_only() {
        let csv = rows_to_csv(&[]);
        assert_eq!(csv, format!("{}\n", CSV_HEADER));
    }

    #[test]
    fn manifest_round_trips_and_hash_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(ExperimentKind::Subspace);
        cfg.n_grid = vec![10];
        cfg.r_grid = vec![1];
        cfg.s_grid = vec![1.5];
        let path = dir.path().join("manifest.json");
        write_manifest(&path, &cfg).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back.master_seed, cfg.master_seed);
        assert_eq!(back.config_hash, config_hash(&cfg).unwrap());
        assert_eq!(back.config.n_grid, vec![10]);
    }

    #[test]
    fn plots_only_when_requested() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(ExperimentKind::Subspace);
        cfg.n_grid = vec![10];
        cfg.r_grid = vec![1];
        cfg.s_grid = vec![1.5];
        let output = ExperimentOutput { rows: vec![sample_row()], traces: vec![] };
        let emitted = emit_outputs(&output, &cfg, dir.path()).unwrap();
        assert!(emitted.plots.is_empty());
        assert!(emitted.results_csv.exists());
        cfg.plots = true;
        let emitted = emit_outputs(&output, &cfg, dir.path()).unwrap();
        assert!(!emitted.plots.is_empty());
        for p in &emitted.plots {
            let text = std::fs::read_to_string(p).unwrap();
            assert!(text.starts_with("<svg"));
        }
    }
}
