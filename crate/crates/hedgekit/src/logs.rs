//! Per-iteration CSV logs.
//!
//! Plain runs write `iter,primal_residual,dual_residual,combined,objective,r`.
//! Runs with expectation constraints append `constraint_violation,w_norm`.

use std::io::{Read, Write};

use hedgekit_core::exfunl::LiftedRecord;
use hedgekit_core::pha::IterationRecord;
use serde::{Deserialize, Serialize};

use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Row {
    iter: usize,
    primal_residual: f64,
    dual_residual: f64,
    combined: f64,
    objective: f64,
    r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct LiftedRow {
    iter: usize,
    primal_residual: f64,
    dual_residual: f64,
    combined: f64,
    objective: f64,
    r: f64,
    constraint_violation: f64,
    w_norm: f64,
}

impl From<&IterationRecord> for Row {
    fn from(r: &IterationRecord) -> Self {
        Self {
            iter: r.iter,
            primal_residual: r.primal_residual,
            dual_residual: r.dual_residual,
            combined: r.combined,
            objective: r.objective,
            r: r.r,
        }
    }
}

impl From<Row> for IterationRecord {
    fn from(r: Row) -> Self {
        Self {
            iter: r.iter,
            primal_residual: r.primal_residual,
            dual_residual: r.dual_residual,
            combined: r.combined,
            objective: r.objective,
            r: r.r,
        }
    }
}

pub fn write_iteration_log<W: Write>(out: W, log: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if log.is_empty() {
        w.write_record(["iter", "primal_residual", "dual_residual", "combined", "objective", "r"])?;
    }
    for rec in log {
        w.serialize(Row::from(rec))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_iteration_log<R: Read>(input: R) -> Result<Vec<IterationRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize::<Row>() {
        out.push(row?.into());
    }
    Ok(out)
}

pub fn write_lifted_log<W: Write>(out: W, log: &[LiftedRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if log.is_empty() {
        w.write_record([
            "iter",
            "primal_residual",
            "dual_residual",
            "combined",
            "objective",
            "r",
            "constraint_violation",
            "w_norm",
        ])?;
    }
    for rec in log {
        let p = &rec.pha;
        w.serialize(LiftedRow {
            iter: p.iter,
            primal_residual: p.primal_residual,
            dual_residual: p.dual_residual,
            combined: p.combined,
            objective: p.objective,
            r: p.r,
            constraint_violation: rec.constraint_violation,
            w_norm: rec.w_norm,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_lifted_log<R: Read>(input: R) -> Result<Vec<LiftedRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize::<LiftedRow>() {
        let row = row?;
        out.push(LiftedRecord {
            pha: IterationRecord {
                iter: row.iter,
                primal_residual: row.primal_residual,
                dual_residual: row.dual_residual,
                combined: row.combined,
                objective: row.objective,
                r: row.r,
            },
            constraint_violation: row.constraint_violation,
            w_norm: row.w_norm,
        });
    }
    Ok(out)
}
