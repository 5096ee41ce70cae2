//! JSON instance files.
//!
//! ```json
//! {
//!   "stages": 2,
//!   "stage_dims": [2, 0],
//!   "scenarios": [{ "id": 0, "components": [[0.9, 2.3], []], "prob": 0.25 }, ...],
//!   "two_stage": {
//!     "n1": 1, "n2": 3,
//!     "x1_lower": [0.0], "x1_upper": [4.0],
//!     "per_scenario": [{ "id": 0, "q": [...], "c": [...], "A": [[...]], "B": [[...]],
//!                        "d": [...], "x2_upper": [0.9, 2.3, null] }, ...]
//!   }
//! }
//! ```
//!
//! `stage_dims` are the lengths of the per-stage data components. Infinite
//! bounds are written as `null`, since JSON has no infinity. Scenarios are
//! written in increasing id order, and `per_scenario` records are matched to
//! scenarios by id when reading. A file without a `two_stage` block describes
//! only a probability space.

use std::fs;
use std::path::Path;

use hedgekit_core::linalg::Matrix;
use hedgekit_core::probspace::{FiniteProbSpace, Scenario};
use hedgekit_core::problems::{TwoStageLPData, TwoStageScenario};
use serde::{Deserialize, Serialize};

use crate::error::io_err;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub stages: usize,
    pub stage_dims: Vec<usize>,
    pub scenarios: Vec<ScenarioRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_stage: Option<TwoStageBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub id: u64,
    pub components: Vec<Vec<f64>>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageBlock {
    pub n1: usize,
    pub n2: usize,
    pub x1_lower: Vec<Option<f64>>,
    pub x1_upper: Vec<Option<f64>>,
    pub per_scenario: Vec<TwoStageRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageRecord {
    pub id: u64,
    pub q: Vec<f64>,
    pub c: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub d: Vec<f64>,
    pub x2_upper: Vec<Option<f64>>,
}

fn encode(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn decode(x: Option<f64>, missing: f64) -> f64 {
    x.unwrap_or(missing)
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.to_rows()
}

fn matrix_from(rows: &[Vec<f64>], cols: usize, what: &str, id: u64) -> Result<Matrix> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Format(format!("scenario {id}: every row of {what} must have {cols} entries")));
    }
    let mut m = Matrix::zeros(rows.len(), cols);
    for (i, r) in rows.iter().enumerate() {
        m.row_mut(i).copy_from_slice(r);
    }
    Ok(m)
}

impl SpaceFile {
    pub fn from_space(space: &FiniteProbSpace) -> Self {
        let scenarios: Vec<ScenarioRecord> = space
            .scenarios()
            .iter()
            .zip(space.probabilities())
            .map(|(s, &prob)| ScenarioRecord { id: s.id, components: s.components.clone(), prob })
            .collect();
        let stage_dims = scenarios[0].components.iter().map(Vec::len).collect();
        Self { stages: space.stages(), stage_dims, scenarios, two_stage: None }
    }

    pub fn from_two_stage(data: &TwoStageLPData) -> Self {
        let mut file = Self::from_space(&data.space);
        let per_scenario = data
            .space
            .scenarios()
            .iter()
            .zip(&data.scenarios)
            .map(|(s, r)| TwoStageRecord {
                id: s.id,
                q: r.q.clone(),
                c: r.c.clone(),
                a: matrix_rows(&r.a),
                b: matrix_rows(&r.b),
                d: r.d.clone(),
                x2_upper: r.x2_upper.iter().copied().map(encode).collect(),
            })
            .collect();
        file.two_stage = Some(TwoStageBlock {
            n1: data.n1,
            n2: data.n2,
            x1_lower: data.x1_lower.iter().copied().map(encode).collect(),
            x1_upper: data.x1_upper.iter().copied().map(encode).collect(),
            per_scenario,
        });
        file
    }

    /// Checks the declared shape and builds the space.
    pub fn to_space(&self) -> Result<FiniteProbSpace> {
        if self.stage_dims.len() != self.stages {
            return Err(Error::Format(format!("{} stage_dims for {} stages", self.stage_dims.len(), self.stages)));
        }
        for s in &self.scenarios {
            let dims: Vec<usize> = s.components.iter().map(Vec::len).collect();
            if dims != self.stage_dims {
                return Err(Error::Format(format!(
                    "scenario {} has component lengths {dims:?}, expected {:?}",
                    s.id, self.stage_dims
                )));
            }
        }
        let scen = self.scenarios.iter().map(|s| Scenario::new(s.id, s.components.clone())).collect();
        let probs = self.scenarios.iter().map(|s| s.prob).collect();
        Ok(FiniteProbSpace::new(scen, probs)?)
    }

    pub fn to_two_stage(&self) -> Result<TwoStageLPData> {
        let space = self.to_space()?;
        let block = self
            .two_stage
            .as_ref()
            .ok_or_else(|| Error::Format("file has no two_stage block".into()))?;
        let mut scenarios = Vec::with_capacity(space.len());
        for s in space.scenarios() {
            let mut found = block.per_scenario.iter().filter(|r| r.id == s.id);
            let r = found.next().ok_or_else(|| Error::Format(format!("no two_stage record for scenario {}", s.id)))?;
            if found.next().is_some() {
                return Err(Error::Format(format!("two two_stage records for scenario {}", s.id)));
            }
            scenarios.push(TwoStageScenario {
                q: r.q.clone(),
                c: r.c.clone(),
                a: matrix_from(&r.a, block.n1, "A", r.id)?,
                b: matrix_from(&r.b, block.n2, "B", r.id)?,
                d: r.d.clone(),
                x2_upper: r.x2_upper.iter().map(|&u| decode(u, f64::INFINITY)).collect(),
            });
        }
        if block.per_scenario.len() != space.len() {
            return Err(Error::Format(format!(
                "{} two_stage records for {} scenarios",
                block.per_scenario.len(),
                space.len()
            )));
        }
        let data = TwoStageLPData {
            n1: block.n1,
            n2: block.n2,
            x1_lower: block.x1_lower.iter().map(|&l| decode(l, f64::NEG_INFINITY)).collect(),
            x1_upper: block.x1_upper.iter().map(|&u| decode(u, f64::INFINITY)).collect(),
            space,
            scenarios,
        };
        data.validate()?;
        Ok(data)
    }
}

pub fn space_to_json(space: &FiniteProbSpace) -> String {
    serde_json::to_string_pretty(&SpaceFile::from_space(space)).expect("plain data serializes")
}

pub fn space_from_json(text: &str) -> Result<FiniteProbSpace> {
    serde_json::from_str::<SpaceFile>(text)?.to_space()
}

pub fn two_stage_to_json(data: &TwoStageLPData) -> String {
    serde_json::to_string_pretty(&SpaceFile::from_two_stage(data)).expect("plain data serializes")
}

pub fn two_stage_from_json(text: &str) -> Result<TwoStageLPData> {
    serde_json::from_str::<SpaceFile>(text)?.to_two_stage()
}

pub fn read_two_stage(path: &Path) -> Result<TwoStageLPData> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    two_stage_from_json(&text)
}

pub fn write_two_stage(path: &Path, data: &TwoStageLPData) -> Result<()> {
    fs::write(path, two_stage_to_json(data)).map_err(io_err(path))
}
