//! Repeated experiment runs with per-run logs and a summary row.
//!
//! A run directory holds
//!
//! - `runs.csv`: one row per repeat (`repeat,seed,iter,time_s,fval,objective,converged,error`),
//! - `run_<k>.csv`: the iteration log of repeat `k` (PHA runs only),
//! - `summary.csv` and `summary.md`: the aggregated row.
//!
//! Every summary number can be recomputed from `runs.csv`; see [`crate::audit`].

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hedgekit_core::pha::{pha_solve_with, ScenarioMap};
use hedgekit_core::problems::{build_two_stage, first_stage_x1_range, solve_extensive, ExperimentSpec, InstanceSource};
use serde::{Deserialize, Serialize};

use crate::error::io_err;
use crate::logs::write_iteration_log;
use crate::summary::{emit_table, measure_label, RunSummary, TableFormat};
use crate::Result;

/// Tolerance handed to the extensive-form solve when `--oracle` is set.
pub const ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Solve the deterministic equivalent instead of running PHA.
    pub oracle: bool,
    /// Directory for logs and summaries; nothing is written when `None`.
    pub out: Option<PathBuf>,
}

/// Outcome of one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repeat: usize,
    pub seed: u64,
    /// PHA iterations; 0 for oracle runs and failed runs.
    pub iter: usize,
    pub time_s: f64,
    /// Model objective of the returned first-stage decision: the risk of the
    /// recourse cost with `x₁` fixed at the nonanticipative average. NaN when
    /// the run errored.
    pub fval: f64,
    /// `E[g(z, ξ)]` at the final PHA iterate, the last `objective` of the run
    /// log. Equal to `fval` for oracle runs.
    pub objective: f64,
    pub converged: bool,
    /// Error message of a failed run, empty otherwise.
    pub error: String,
}

impl RunRecord {
    pub fn has_value(&self) -> bool {
        self.error.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub summary: RunSummary,
    pub runs: Vec<RunRecord>,
}

/// Aggregates run records into a summary row. Means are taken over the runs
/// that returned a value.
pub fn summarize(spec: &ExperimentSpec, runs: &[RunRecord]) -> RunSummary {
    let ok: Vec<&RunRecord> = runs.iter().filter(|r| r.has_value()).collect();
    let mean = |f: &dyn Fn(&RunRecord) -> f64| {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
        }
    };
    RunSummary {
        sn: spec.sn,
        dims: match spec.source {
            InstanceSource::Random { n1, n2 } => Some((n1, n2)),
            _ => None,
        },
        measure: measure_label(&spec.measure),
        iter: mean(&|r| r.iter as f64),
        time_s: mean(&|r| r.time_s),
        fval: mean(&|r| r.fval),
        repeats: runs.len(),
        seed: spec.seed,
        failures: runs.iter().filter(|r| !r.has_value() || !r.converged).count(),
    }
}

pub fn run_log_path(dir: &Path, repeat: usize) -> PathBuf {
    dir.join(format!("run_{repeat:03}.csv"))
}

/// Generates `repeats` instances with seeds `spec.seed + k`, solves each and
/// aggregates. Solver errors are recorded per run rather than returned;
/// only invalid specs and file-system errors abort.
pub fn run_experiment<E: ScenarioMap>(
    spec: &ExperimentSpec,
    repeats: usize,
    opts: &RunOptions,
    exec: &E,
) -> Result<ExperimentResult> {
    spec.validate()?;
    if repeats == 0 {
        return Err(hedgekit_core::Error::Config("repeats must be at least 1".into()).into());
    }
    if let Some(dir) = &opts.out {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut runs = Vec::with_capacity(repeats);
    for k in 0..repeats {
        let seed = spec.repeat_seed(k);
        let mut record = RunRecord { repeat: k, seed, iter: 0, time_s: 0.0, fval: f64::NAN, objective: f64::NAN, converged: false, error: String::new() };
        let built = spec.instance(k).and_then(|data| Ok((build_two_stage(&data, &spec.measure)?, data)));
        let (prog, data) = match built {
            Ok(p) => p,
            Err(e) => {
                record.error = e.to_string();
                runs.push(record);
                continue;
            }
        };
        let start = Instant::now();
        if opts.oracle {
            match solve_extensive(&prog, ORACLE_TOL) {
                Ok(sol) => {
                    record.fval = sol.objective;
                    record.objective = sol.objective;
                    record.converged = true;
                }
                Err(e) => record.error = e.to_string(),
            }
            record.time_s = start.elapsed().as_secs_f64();
        } else {
            let outcome = pha_solve_with(&prog, &spec.pha, exec, |_| {});
            record.time_s = start.elapsed().as_secs_f64();
            match outcome {
                Ok(out) => {
                    record.iter = out.iterations();
                    record.objective = out.objective;
                    let z_bar = prog.project_n(&out.z);
                    let x1 = &z_bar.scenario(0)[first_stage_x1_range(&spec.measure, data.n1)];
                    match data.policy_value(&spec.measure, x1) {
                        Some(v) => record.fval = v,
                        None => record.error = "recourse infeasible at the averaged first-stage decision".into(),
                    }
                    record.converged = out.converged;
                    if let Some(dir) = &opts.out {
                        let path = run_log_path(dir, k);
                        let file = fs::File::create(&path).map_err(io_err(&path))?;
                        write_iteration_log(file, &out.log)?;
                    }
                }
                Err(e) => record.error = e.to_string(),
            }
        }
        runs.push(record);
    }
    let summary = summarize(spec, &runs);
    if let Some(dir) = &opts.out {
        write_runs(&dir.join("runs.csv"), &runs)?;
        let csv_path = dir.join("summary.csv");
        fs::write(&csv_path, emit_table(std::slice::from_ref(&summary), TableFormat::Csv)).map_err(io_err(&csv_path))?;
        let md_path = dir.join("summary.md");
        fs::write(&md_path, emit_table(std::slice::from_ref(&summary), TableFormat::Markdown)).map_err(io_err(&md_path))?;
    }
    Ok(ExperimentResult { summary, runs })
}

pub fn write_runs(path: &Path, runs: &[RunRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    for r in runs {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_runs(path: &Path) -> Result<Vec<RunRecord>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
