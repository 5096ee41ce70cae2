//! Recomputes a run directory's summary from its per-run files.

use std::fs;
use std::path::Path;

use crate::error::io_err;
use crate::harness::{read_runs, run_log_path};
use crate::logs::read_iteration_log;
use crate::summary::parse_csv;
use crate::Result;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub runs: usize,
    pub logs_checked: usize,
    /// One line per disagreement; empty when everything recomputes.
    pub mismatches: Vec<String>,
}

impl AuditReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn same(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

/// Checks `summary.csv` against `runs.csv`, and each run's iteration count
/// and final PHA objective against its `run_<k>.csv` log when one exists.
pub fn audit_dir(dir: &Path) -> Result<AuditReport> {
    let summary_path = dir.join("summary.csv");
    let text = fs::read_to_string(&summary_path).map_err(io_err(&summary_path))?;
    let rows = parse_csv(&text)?;
    let runs = read_runs(&dir.join("runs.csv"))?;
    let mut report = AuditReport { runs: runs.len(), ..Default::default() };
    let [row] = rows.as_slice() else {
        report.mismatches.push(format!("summary.csv has {} rows, expected 1", rows.len()));
        return Ok(report);
    };

    let valued: Vec<_> = runs.iter().filter(|r| r.error.is_empty()).collect();
    let n = valued.len() as f64;
    let mean = |xs: Vec<f64>| if xs.is_empty() { f64::NAN } else { xs.iter().sum::<f64>() / n };
    let checks = [
        ("iter", row.iter, mean(valued.iter().map(|r| r.iter as f64).collect())),
        ("time_s", row.time_s, mean(valued.iter().map(|r| r.time_s).collect())),
        ("fval", row.fval, mean(valued.iter().map(|r| r.fval).collect())),
    ];
    for (name, printed, recomputed) in checks {
        if !same(printed, recomputed) {
            report.mismatches.push(format!("{name}: summary says {printed}, runs give {recomputed}"));
        }
    }
    if row.repeats != runs.len() {
        report.mismatches.push(format!("repeats: summary says {}, runs.csv has {}", row.repeats, runs.len()));
    }
    let failures = runs.iter().filter(|r| !r.error.is_empty() || !r.converged).count();
    if row.failures != failures {
        report.mismatches.push(format!("failures: summary says {}, runs give {failures}", row.failures));
    }

    for r in &runs {
        let path = run_log_path(dir, r.repeat);
        if !path.exists() {
            continue;
        }
        let log = read_iteration_log(fs::File::open(&path).map_err(io_err(&path))?)?;
        report.logs_checked += 1;
        if log.len() != r.iter {
            report.mismatches.push(format!("repeat {}: {} log rows but iter = {}", r.repeat, log.len(), r.iter));
        }
        match log.last() {
            Some(last) if !same(last.objective, r.objective) => report.mismatches.push(format!(
                "repeat {}: last logged objective {} but runs.csv says {}",
                r.repeat, last.objective, r.objective
            )),
            _ => {}
        }
    }
    Ok(report)
}
