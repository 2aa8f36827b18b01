//! Text and CSV emission for certificates, evolutions, and ensembles.
//!
//! Text reports are stable-ordered `key: value` lines for diffing. CSV files
//! carry a header row and a `schema` column (currently `v1`); floats are
//! written with 17 significant digits.

use std::path::Path;

use crate::certify::CertificateReport;
use crate::minimal::EvolutionTrace;
use crate::trajectories::{EnsembleSummary, TrajectoryRecord};
use crate::Result;

pub const CSV_SCHEMA: &str = "v1";

/// One certificate outcome with its sweep label and exit-code polarity.
#[derive(Clone, Debug)]
pub struct LabeledReport {
    /// Which check and truncation produced this row, e.g. `lambda_pair@10x10`.
    pub label: String,
    pub report: CertificateReport,
    /// Whether this outcome counts against regularity: a failed regularity
    /// certificate, or a fired non-unitality detection.
    pub adverse: bool,
}

/// 17 significant digits, round-trip safe.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn dims_label(report: &CertificateReport) -> String {
    let dims: Vec<String> = report
        .truncation
        .mode_dims()
        .iter()
        .map(|d| d.to_string())
        .collect();
    format!("{}s{}", dims.join("x"), report.truncation.spin_dim())
}

/// Render the stable text report for a certificate suite.
pub fn render_text(model: &str, reports: &[LabeledReport], adverse: bool) -> String {
    let mut out = String::new();
    out.push_str(&format!("model: {model}\n"));
    out.push_str(&format!(
        "verdict: {}\n",
        if adverse {
            "not certified regular"
        } else {
            "certified regular at desk scale"
        }
    ));
    out.push_str(&format!("checks: {}\n", reports.len()));
    for lr in reports {
        let r = &lr.report;
        out.push_str("---\n");
        out.push_str(&format!("check: {}\n", lr.label));
        out.push_str(&format!("kind: {}\n", r.kind.as_str()));
        out.push_str(&format!("truncation: {}\n", dims_label(r)));
        out.push_str(&format!("interior_buffer: {}\n", r.interior_buffer));
        out.push_str(&format!("passed: {}\n", r.passed));
        out.push_str(&format!("adverse: {}\n", lr.adverse));
        out.push_str(&format!("margin: {}\n", fmt_float(r.margin)));
        for (k, v) in &r.constants {
            out.push_str(&format!("constant.{k}: {}\n", fmt_float(*v)));
        }
        out.push_str(&format!("details: {}\n", r.details));
    }
    out
}

/// Machine-readable rows for a certificate suite.
pub fn write_reports_csv(path: &Path, reports: &[LabeledReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "schema",
        "check",
        "kind",
        "truncation",
        "interior_buffer",
        "passed",
        "adverse",
        "margin",
        "constants",
        "details",
    ])
    .map_err(csv_err)?;
    for lr in reports {
        let r = &lr.report;
        let constants: Vec<String> = r
            .constants
            .iter()
            .map(|(k, v)| format!("{k}={}", fmt_float(*v)))
            .collect();
        w.write_record([
            CSV_SCHEMA,
            &lr.label,
            r.kind.as_str(),
            &dims_label(r),
            &r.interior_buffer.to_string(),
            &r.passed.to_string(),
            &lr.adverse.to_string(),
            &fmt_float(r.margin),
            &constants.join(";"),
            &r.details,
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_evolution_csv(path: &Path, trace: &EvolutionTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "schema",
        "time",
        "trace",
        "hermiticity_defect",
        "boundary_population",
    ])
    .map_err(csv_err)?;
    for row in &trace.rows {
        w.write_record([
            CSV_SCHEMA,
            &fmt_float(row.time),
            &fmt_float(row.trace),
            &fmt_float(row.hermiticity_defect),
            &fmt_float(row.boundary_population),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-level defect diagnostics of a minimal-solution iteration.
pub fn write_iteration_csv(path: &Path, rows: &[(usize, f64, f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "schema",
        "level",
        "defect_max",
        "defect_min_eig",
        "monotonicity_margin",
    ])
    .map_err(csv_err)?;
    for (level, dmax, dmin, mono) in rows {
        w.write_record([
            CSV_SCHEMA,
            &level.to_string(),
            &fmt_float(*dmax),
            &fmt_float(*dmin),
            &fmt_float(*mono),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectories_csv(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["schema", "seed_index", "n_jumps", "exploded", "last_jump_time"])
        .map_err(csv_err)?;
    for r in records {
        let last = r.jump_times.last().copied().unwrap_or(f64::NAN);
        w.write_record([
            CSV_SCHEMA,
            &r.index.to_string(),
            &r.jump_times.len().to_string(),
            &r.exploded.to_string(),
            &fmt_float(last),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ensemble_csv(path: &Path, s: &EnsembleSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "schema",
        "n_traj",
        "explosion_fraction",
        "survival_estimate",
        "mean_time_to_cap",
    ])
    .map_err(csv_err)?;
    w.write_record([
        CSV_SCHEMA,
        &s.n_traj.to_string(),
        &fmt_float(s.explosion_fraction),
        &fmt_float(s.survival_estimate),
        &s.mean_time_to_cap.map(fmt_float).unwrap_or_default(),
    ])
    .map_err(csv_err)?;
    w.flush()?;
    Ok(())
}

pub fn write_deficiency_csv(path: &Path, trend: &[(usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["schema", "dimension", "residual"]).map_err(csv_err)?;
    for (d, r) in trend {
        w.write_record([CSV_SCHEMA, &d.to_string(), &fmt_float(*r)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e))
}

impl From<csv::Error> for crate::Error {
    fn from(e: csv::Error) -> Self {
        csv_err(e)
    }
}
