//! CSV and plain-text writers. Floats are printed with 17 significant
//! digits so every file re-parses to the in-memory value.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use slabnop::{FluxField, Grid1D};

use crate::case::CaseReport;
use crate::error::{config_err, Result};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

/// Columns `x, phi_g1, phi_g2, ...`.
pub fn write_flux_csv(path: &Path, grid: &Grid1D, flux: &FluxField) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["x".to_string()];
    header.extend((1..=flux.n_groups()).map(|g| format!("phi_g{g}")));
    w.write_record(&header)?;
    for (i, &x) in grid.centers().iter().enumerate() {
        let mut row = vec![fmt_f64(x)];
        row.extend(flux.phi.iter().map(|g| fmt_f64(g[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Cell centers and per-group fluxes from a file written by
/// [`write_flux_csv`].
pub fn read_flux_csv(path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let groups = r.headers()?.len().saturating_sub(1);
    let mut x = Vec::new();
    let mut phi = vec![Vec::new(); groups];
    for rec in r.records() {
        let rec = rec?;
        let parse = |s: &str| s.parse::<f64>().map_err(|e| config_err(format!("{}: {e}", path.display())));
        x.push(parse(&rec[0])?);
        for (g, col) in phi.iter_mut().enumerate() {
            col.push(parse(&rec[g + 1])?);
        }
    }
    Ok((x, phi))
}

pub fn write_loss_csv(path: &Path, first_epoch: u64, losses: &[f64], append: bool) -> Result<()> {
    ensure_parent(path)?;
    let exists = append && path.exists();
    let file = fs::OpenOptions::new()
        .create(true)
        .write(true)
        .append(exists)
        .truncate(!exists)
        .open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if !exists {
        w.write_record(["epoch", "loss"])?;
    }
    for (i, &l) in losses.iter().enumerate() {
        w.write_record([(first_epoch + i as u64 + 1).to_string(), fmt_f64(l)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn report_text(r: &CaseReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "case: {}", r.case_id);
    let _ = writeln!(s, "algorithm: {}", r.algorithm);
    let _ = writeln!(s, "converged: {}", r.converged);
    if let Some(k) = r.k {
        let _ = writeln!(s, "k: {k:.8}");
    }
    let _ = writeln!(s, "outer iterations: {}", r.outer_iterations);
    let _ = writeln!(s, "inner iterations: {}", r.inner_iterations);
    if let Some(st) = &r.stage1 {
        let _ = writeln!(
            s,
            "stage 1: {} iterations, {} sweeps, {} operator calls, converged {}{}",
            st.iterations,
            st.sweeps,
            st.operator_calls,
            st.converged,
            if st.fallback { ", fell back to cold start" } else { "" }
        );
        if let Some(k) = st.k {
            let _ = writeln!(s, "stage 1 k: {k:.8}");
        }
    }
    if let (Some(o), Some(i)) = (r.cold_start_outer, r.cold_start_inner) {
        let _ = writeln!(s, "cold start: {o} outer, {i} inner");
    }
    if let Some(k) = r.cold_start_k {
        let _ = writeln!(s, "cold start k: {k:.8}");
    }
    if let Some(d) = r.l2_vs_cold_start {
        let _ = writeln!(s, "L2 vs cold start (normalized): {d:.3e}");
    }
    let _ = writeln!(s, "wall time: {:.3} s", r.wall_time_s);
    s
}

/// Writes `flux.csv`, `report.json` and `report.txt` into `dir`.
pub fn write_case_outputs(dir: &Path, grid: &Grid1D, flux: &FluxField, report: &CaseReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_flux_csv(&dir.join("flux.csv"), grid, flux)?;
    let json = serde_json::to_string_pretty(report).map_err(slabnop::Error::from)?;
    fs::write(dir.join("report.json"), json + "\n")?;
    fs::write(dir.join("report.txt"), report_text(report))?;
    Ok(())
}

/// One line of the benchmark comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub case: String,
    pub algorithm: String,
    /// `ok`, `not_converged` or `failed: <reason>`.
    pub status: String,
    pub inner_iterations: Option<usize>,
    pub outer_iterations: Option<usize>,
    pub stage1_iterations: Option<usize>,
    pub wall_time_s: Option<f64>,
    pub normalized_time: Option<f64>,
    pub l2_vs_baseline: Option<f64>,
    pub k: Option<f64>,
}

pub const TABLE_HEADER: [&str; 10] = [
    "case",
    "algorithm",
    "status",
    "inner_iterations",
    "outer_iterations",
    "stage1_iterations",
    "wall_time_s",
    "normalized_time",
    "l2_vs_baseline",
    "k",
];

/// Columns that depend on the machine rather than the computation.
pub const TIMING_COLUMNS: [&str; 2] = ["wall_time_s", "normalized_time"];

impl TableRow {
    pub fn failed(case: &str, algorithm: &str, reason: &str) -> Self {
        Self {
            case: case.into(),
            algorithm: algorithm.into(),
            status: format!("failed: {}", reason.replace('\n', " ")),
            inner_iterations: None,
            outer_iterations: None,
            stage1_iterations: None,
            wall_time_s: None,
            normalized_time: None,
            l2_vs_baseline: None,
            k: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn record(&self) -> [String; 10] {
        [
            self.case.clone(),
            self.algorithm.clone(),
            self.status.clone(),
            opt(self.inner_iterations),
            opt(self.outer_iterations),
            opt(self.stage1_iterations),
            opt_f64(self.wall_time_s),
            opt_f64(self.normalized_time),
            opt_f64(self.l2_vs_baseline),
            opt_f64(self.k),
        ]
    }
}

pub fn write_table_csv(path: &Path, rows: &[TableRow]) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TABLE_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn table_text(rows: &[TableRow]) -> String {
    let short = |v: Option<f64>, prec: usize| v.map(|v| format!("{v:.prec$e}")).unwrap_or_else(|| "-".into());
    let int = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
    let mut s = format!(
        "{:<22} {:<18} {:<14} {:>7} {:>7} {:>7} {:>10} {:>9} {:>10} {:>10}\n",
        "case", "algorithm", "status", "inner", "outer", "stage1", "wall_s", "norm_t", "l2", "k"
    );
    for r in rows {
        let status: String = r.status.chars().take(14).collect();
        let _ = writeln!(
            s,
            "{:<22} {:<18} {:<14} {:>7} {:>7} {:>7} {:>10} {:>9} {:>10} {:>10}",
            r.case,
            r.algorithm,
            status,
            int(r.inner_iterations),
            int(r.outer_iterations),
            int(r.stage1_iterations),
            r.wall_time_s.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
            r.normalized_time.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
            short(r.l2_vs_baseline, 2),
            r.k.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into()),
        );
    }
    for r in rows.iter().filter(|r| r.status.chars().count() > 14) {
        let _ = writeln!(s, "{} / {}: {}", r.case, r.algorithm, r.status);
    }
    s
}
