//! Experiment summary rows, one per (instance family, model, sn) cell, with
//! the columns of the usual `iter / time(s) / fval` results table.

use std::fmt::Write as _;

use hedgekit_core::measures::{Measure, MeasureSpec};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub sn: usize,
    /// `(n₁, n₂)` for random instances; `None` for the airline family and files.
    pub dims: Option<(usize, usize)>,
    pub measure: String,
    /// Mean PHA iteration count over the successful repeats.
    pub iter: f64,
    /// Mean solve time in seconds, instance generation excluded.
    pub time_s: f64,
    /// Mean optimal value at the returned iterate.
    pub fval: f64,
    pub repeats: usize,
    pub seed: u64,
    /// Repeats that errored or stopped at the iteration cap.
    pub failures: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

pub const CSV_HEADER: [&str; 9] = ["sn", "dims", "measure", "iter", "time_s", "fval", "repeats", "seed", "failures"];
const MD_HEADER: [&str; 9] = ["sn", "dims", "measure", "iter", "time(s)", "fval", "repeats", "seed", "failures"];

/// `cvar(0.5)`, `oce(2,0.5)` and so on; the format `--model` flags echo.
pub fn measure_label(m: &MeasureSpec) -> String {
    match m.measure() {
        Measure::Cvar { alpha } => format!("cvar({alpha})"),
        Measure::Oce { gamma1, gamma2 } => format!("oce({gamma1},{gamma2})"),
        Measure::MeanDev { lambda } => format!("mean_dev_penalty({lambda})"),
        other => other.kind_name().to_string(),
    }
}

fn dims_cell(d: Option<(usize, usize)>) -> String {
    d.map_or_else(|| "-".to_string(), |(a, b)| format!("{a}x{b}"))
}

fn parse_dims(s: &str) -> Result<Option<(usize, usize)>> {
    if s == "-" {
        return Ok(None);
    }
    let bad = || Error::Format(format!("dims cell {s:?} is neither '-' nor 'N1xN2'"));
    let (a, b) = s.split_once('x').ok_or_else(bad)?;
    Ok(Some((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?)))
}

impl RunSummary {
    fn csv_cells(&self) -> [String; 9] {
        // `{}` on f64 prints the shortest string that parses back to the same value.
        [
            self.sn.to_string(),
            dims_cell(self.dims),
            self.measure.clone(),
            self.iter.to_string(),
            self.time_s.to_string(),
            self.fval.to_string(),
            self.repeats.to_string(),
            self.seed.to_string(),
            self.failures.to_string(),
        ]
    }

    fn md_cells(&self) -> [String; 9] {
        [
            self.sn.to_string(),
            dims_cell(self.dims),
            self.measure.clone(),
            format!("{:.1}", self.iter),
            format!("{:.3}", self.time_s),
            format!("{:.3}", self.fval),
            self.repeats.to_string(),
            self.seed.to_string(),
            self.failures.to_string(),
        ]
    }
}

pub fn emit_table(rows: &[RunSummary], format: TableFormat) -> String {
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER).expect("in-memory write");
            for r in rows {
                w.write_record(r.csv_cells()).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII cells")
        }
        TableFormat::Markdown => {
            let body: Vec<[String; 9]> = rows.iter().map(RunSummary::md_cells).collect();
            let mut width: Vec<usize> = MD_HEADER.iter().map(|h| h.chars().count()).collect();
            for cells in &body {
                for (w, c) in width.iter_mut().zip(cells) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let mut out = String::new();
            let line = |out: &mut String, cells: &[String]| {
                out.push('|');
                for (c, w) in cells.iter().zip(&width) {
                    let _ = write!(out, " {c:>w$} |");
                }
                out.push('\n');
            };
            line(&mut out, &MD_HEADER.map(String::from));
            out.push('|');
            for w in &width {
                let _ = write!(out, "{}:|", "-".repeat(w + 1));
            }
            out.push('\n');
            for cells in &body {
                line(&mut out, cells);
            }
            out
        }
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<RunSummary>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != CSV_HEADER {
        return Err(Error::Format(format!("unexpected summary header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| Error::Format(format!("column {} holds {:?}", CSV_HEADER[i], &rec[i])))
        };
        let int = |i: usize| -> Result<u64> {
            rec[i].parse().map_err(|_| Error::Format(format!("column {} holds {:?}", CSV_HEADER[i], &rec[i])))
        };
        rows.push(RunSummary {
            sn: int(0)? as usize,
            dims: parse_dims(&rec[1])?,
            measure: rec[2].to_string(),
            iter: num(3)?,
            time_s: num(4)?,
            fval: num(5)?,
            repeats: int(6)? as usize,
            seed: int(7)?,
            failures: int(8)? as usize,
        });
    }
    Ok(rows)
}
