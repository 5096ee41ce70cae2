//! Finite probability spaces, scenario-indexed policies and the projections
//! onto the nonanticipativity subspace `N` and its complement `M`.
//!
//! Scenarios are kept as a flat list sorted by id. Which scenarios share a
//! history at each stage is recorded separately in an [`InformationPartition`],
//! so every projection reduces to probability-weighted means over classes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Smallest probability accepted for a scenario.
pub const MIN_PROBABILITY: f64 = 1e-15;

/// Allowed deviation of the probability total from one.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// One outcome `ξ = (ξ₁, …, ξ_N)` of the data process.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: u64,
    /// Data revealed at the end of each stage.
    pub components: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn new(id: u64, components: Vec<Vec<f64>>) -> Self {
        Self { id, components }
    }
}

/// A finite set of scenarios with strictly positive probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteProbSpace {
    scenarios: Vec<Scenario>,
    probs: Vec<f64>,
    stages: usize,
}

impl FiniteProbSpace {
    /// Validates and sorts the scenarios by id.
    pub fn new(scenarios: Vec<Scenario>, probs: Vec<f64>) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::InvalidSpace("a space needs at least one scenario".into()));
        }
        if scenarios.len() != probs.len() {
            return Err(Error::Dimension(format!(
                "{} scenarios but {} probabilities",
                scenarios.len(),
                probs.len()
            )));
        }
        let stages = scenarios[0].components.len();
        if stages == 0 {
            return Err(Error::InvalidSpace("scenarios need at least one stage".into()));
        }
        for s in &scenarios {
            if s.components.len() != stages {
                return Err(Error::InvalidSpace(format!(
                    "scenario {} has {} stage components, expected {stages}",
                    s.id,
                    s.components.len()
                )));
            }
        }
        for (s, &p) in scenarios.iter().zip(&probs) {
            if !(p >= MIN_PROBABILITY) || !p.is_finite() {
                return Err(Error::InvalidSpace(format!("scenario {} has probability {p}", s.id)));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::InvalidSpace(format!("probabilities sum to {total}")));
        }
        let mut pairs: Vec<(Scenario, f64)> = scenarios.into_iter().zip(probs).collect();
        pairs.sort_by_key(|(s, _)| s.id);
        if pairs.windows(2).any(|w| w[0].0.id == w[1].0.id) {
            return Err(Error::InvalidSpace("duplicate scenario id".into()));
        }
        let (scenarios, probs) = pairs.into_iter().unzip();
        Ok(Self { scenarios, probs, stages })
    }

    /// Equiprobable space over the given scenarios.
    pub fn uniform(scenarios: Vec<Scenario>) -> Result<Self> {
        let n = scenarios.len().max(1);
        let probs = vec![1.0 / n as f64; scenarios.len()];
        Self::new(scenarios, probs)
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn scenario(&self, i: usize) -> &Scenario {
        &self.scenarios[i]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// Position of the scenario with the given id.
    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.scenarios.binary_search_by_key(&id, |s| s.id).ok()
    }

    /// `E[f]` for one value per scenario.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        values.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }
}

/// For each stage, the classes of scenarios (by index) that share the data
/// history observed before that stage.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationPartition {
    classes: Vec<Vec<Vec<usize>>>,
    class_of: Vec<Vec<usize>>,
}

impl InformationPartition {
    /// Builds a partition from explicit classes and checks that stage one is
    /// a single class and that every stage refines the one before it.
    pub fn new(n_scenarios: usize, classes: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidSpace("partition has no stages".into()));
        }
        let mut class_of = Vec::with_capacity(classes.len());
        for (k, stage) in classes.iter().enumerate() {
            let mut owner = vec![usize::MAX; n_scenarios];
            for (c, members) in stage.iter().enumerate() {
                if members.is_empty() {
                    return Err(Error::InvalidSpace(format!("stage {} has an empty class", k + 1)));
                }
                for &i in members {
                    if i >= n_scenarios || owner[i] != usize::MAX {
                        return Err(Error::InvalidSpace(format!(
                            "stage {} classes do not partition the scenarios",
                            k + 1
                        )));
                    }
                    owner[i] = c;
                }
            }
            if owner.contains(&usize::MAX) {
                return Err(Error::InvalidSpace(format!("stage {} misses a scenario", k + 1)));
            }
            class_of.push(owner);
        }
        if classes[0].len() != 1 {
            return Err(Error::InvalidSpace("stage 1 must be a single class".into()));
        }
        for k in 1..classes.len() {
            for members in &classes[k] {
                let parent = class_of[k - 1][members[0]];
                if members.iter().any(|&i| class_of[k - 1][i] != parent) {
                    return Err(Error::InvalidSpace(format!(
                        "stage {} does not refine stage {}",
                        k + 1,
                        k
                    )));
                }
            }
        }
        Ok(Self { classes, class_of })
    }

    /// Stage one shared by everyone, stage two one class per scenario.
    pub fn two_stage(n_scenarios: usize) -> Self {
        let all: Vec<usize> = (0..n_scenarios).collect();
        let singletons = (0..n_scenarios).map(|i| vec![i]).collect();
        Self::new(n_scenarios, vec![vec![all], singletons]).expect("two-stage partition is valid")
    }

    /// Groups scenarios at stage `k` by exact equality of `(ξ₁, …, ξ_{k−1})`.
    pub fn from_history(space: &FiniteProbSpace) -> Self {
        let mut classes = Vec::with_capacity(space.stages());
        for k in 0..space.stages() {
            let mut groups: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
            for (i, s) in space.scenarios().iter().enumerate() {
                let mut key = Vec::new();
                for comp in &s.components[..k] {
                    key.push(comp.len() as u64);
                    key.extend(comp.iter().map(|v| v.to_bits()));
                }
                groups.entry(key).or_default().push(i);
            }
            let mut stage: Vec<Vec<usize>> = groups.into_values().collect();
            stage.sort_by_key(|c| c[0]);
            classes.push(stage);
        }
        Self::new(space.len(), classes).expect("prefix classes always refine")
    }

    pub fn stages(&self) -> usize {
        self.classes.len()
    }

    /// Classes at `stage` (1-based).
    pub fn classes(&self, stage: usize) -> &[Vec<usize>] {
        &self.classes[stage - 1]
    }

    /// Index of the class containing scenario `i` at `stage` (1-based).
    pub fn class_of(&self, stage: usize, i: usize) -> usize {
        self.class_of[stage - 1][i]
    }

    pub fn n_scenarios(&self) -> usize {
        self.class_of[0].len()
    }

    /// Probability of every class at `stage`.
    pub fn class_probabilities(&self, stage: usize, space: &FiniteProbSpace) -> Vec<f64> {
        self.classes(stage)
            .iter()
            .map(|c| c.iter().map(|&i| space.prob(i)).sum())
            .collect()
    }

    fn conforms(&self, space: &FiniteProbSpace) -> Result<()> {
        if self.n_scenarios() != space.len() {
            return Err(Error::Dimension(format!(
                "partition covers {} scenarios, space has {}",
                self.n_scenarios(),
                space.len()
            )));
        }
        Ok(())
    }
}

/// An element of the policy space: one stage-structured vector
/// `(x₁(ξ), …, x_N(ξ))` per scenario, stored scenario-major in space order.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyVector {
    data: Vec<f64>,
    stage_dims: Vec<usize>,
    offsets: Vec<usize>,
    width: usize,
}

impl PolicyVector {
    pub fn zeros(n_scenarios: usize, stage_dims: &[usize]) -> Self {
        let (offsets, width) = offsets_of(stage_dims);
        Self { data: vec![0.0; n_scenarios * width], stage_dims: stage_dims.to_vec(), offsets, width }
    }

    /// One full-width row per scenario.
    pub fn from_rows(rows: &[Vec<f64>], stage_dims: &[usize]) -> Result<Self> {
        let mut out = Self::zeros(rows.len(), stage_dims);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != out.width {
                return Err(Error::Dimension(format!(
                    "scenario row {i} has length {}, expected {}",
                    r.len(),
                    out.width
                )));
            }
            out.scenario_mut(i).copy_from_slice(r);
        }
        Ok(out)
    }

    pub fn from_flat(data: Vec<f64>, stage_dims: &[usize]) -> Result<Self> {
        let (offsets, width) = offsets_of(stage_dims);
        if width == 0 || data.len() % width != 0 {
            return Err(Error::Dimension(format!(
                "flat length {} is not a multiple of width {width}",
                data.len()
            )));
        }
        Ok(Self { data, stage_dims: stage_dims.to_vec(), offsets, width })
    }

    pub fn n_scenarios(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.data.len() / self.width
        }
    }

    pub fn stage_dims(&self) -> &[usize] {
        &self.stage_dims
    }

    /// Total dimension `n = n₁ + … + n_N` of one scenario's vector.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Offset of stage `stage` (1-based) inside a scenario vector.
    pub fn stage_offset(&self, stage: usize) -> usize {
        self.offsets[stage - 1]
    }

    pub fn scenario(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn scenario_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.width..(i + 1) * self.width]
    }

    /// Stage block `x_k(ξ_i)` with `stage` 1-based.
    pub fn stage_block(&self, i: usize, stage: usize) -> &[f64] {
        let start = i * self.width + self.offsets[stage - 1];
        &self.data[start..start + self.stage_dims[stage - 1]]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.width.max(1)).map(<[f64]>::to_vec).collect()
    }

    /// `self + a·other`.
    pub fn add_scaled(&self, a: f64, other: &Self) -> Self {
        debug_assert!(self.same_shape(other));
        let mut out = self.clone();
        for (o, x) in out.data.iter_mut().zip(&other.data) {
            *o += a * x;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(-1.0, other)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= a);
        out
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.stage_dims == other.stage_dims && self.data.len() == other.data.len()
    }

    fn conforms(&self, space: &FiniteProbSpace) -> Result<()> {
        if self.n_scenarios() != space.len() {
            return Err(Error::Dimension(format!(
                "policy has {} scenarios, space has {}",
                self.n_scenarios(),
                space.len()
            )));
        }
        Ok(())
    }
}

fn offsets_of(stage_dims: &[usize]) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(stage_dims.len());
    let mut acc = 0;
    for d in stage_dims {
        offsets.push(acc);
        acc += d;
    }
    (offsets, acc)
}

/// Expectation inner product `Σ_ξ p(ξ) Σ_k x_k(ξ)·w_k(ξ)`.
pub fn inner_product(a: &PolicyVector, b: &PolicyVector, space: &FiniteProbSpace) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::Dimension("policies have different shapes".into()));
    }
    a.conforms(space)?;
    Ok((0..space.len())
        .map(|i| {
            let s: f64 = a.scenario(i).iter().zip(b.scenario(i)).map(|(x, y)| x * y).sum();
            space.prob(i) * s
        })
        .sum())
}

/// Norm induced by [`inner_product`].
pub fn norm(a: &PolicyVector, space: &FiniteProbSpace) -> Result<f64> {
    inner_product(a, a, space).map(libm::sqrt)
}

/// Replaces the stage-`stage` block by its conditional mean over each
/// information class of that stage. Other stages are left as they are.
pub fn conditional_expectation(
    x: &PolicyVector,
    stage: usize,
    partition: &InformationPartition,
    space: &FiniteProbSpace,
) -> Result<PolicyVector> {
    check_inputs(x, partition, space)?;
    if stage == 0 || stage > partition.stages() {
        return Err(Error::Dimension(format!("stage {stage} outside 1..={}", partition.stages())));
    }
    let mut out = x.clone();
    average_stage(&mut out, x, stage, partition, space);
    Ok(out)
}

/// Orthogonal projection onto `N`: the conditional mean at every stage.
pub fn project_n(
    x: &PolicyVector,
    partition: &InformationPartition,
    space: &FiniteProbSpace,
) -> Result<PolicyVector> {
    check_inputs(x, partition, space)?;
    let mut out = x.clone();
    for stage in 1..=partition.stages() {
        average_stage(&mut out, x, stage, partition, space);
    }
    Ok(out)
}

/// Orthogonal projection onto `M = N^⊥`, i.e. `x − P_N x`.
pub fn project_m(
    x: &PolicyVector,
    partition: &InformationPartition,
    space: &FiniteProbSpace,
) -> Result<PolicyVector> {
    Ok(x.sub(&project_n(x, partition, space)?))
}

fn check_inputs(x: &PolicyVector, partition: &InformationPartition, space: &FiniteProbSpace) -> Result<()> {
    x.conforms(space)?;
    partition.conforms(space)?;
    if x.stage_dims().len() != partition.stages() {
        return Err(Error::Dimension(format!(
            "policy has {} stages, partition has {}",
            x.stage_dims().len(),
            partition.stages()
        )));
    }
    Ok(())
}

fn average_stage(
    out: &mut PolicyVector,
    x: &PolicyVector,
    stage: usize,
    partition: &InformationPartition,
    space: &FiniteProbSpace,
) {
    let dim = x.stage_dims()[stage - 1];
    if dim == 0 {
        return;
    }
    let off = x.stage_offset(stage);
    let mut mean = vec![0.0; dim];
    for class in partition.classes(stage) {
        if class.len() == 1 {
            continue;
        }
        // Exact copies keep already-nonanticipative policies bit-identical.
        let first = x.stage_block(class[0], stage);
        if class.iter().all(|&i| x.stage_block(i, stage) == first) {
            continue;
        }
        mean.iter_mut().for_each(|m| *m = 0.0);
        let mut mass = 0.0;
        for &i in class {
            let p = space.prob(i);
            mass += p;
            for (m, v) in mean.iter_mut().zip(x.stage_block(i, stage)) {
                *m += p * v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= mass);
        for &i in class {
            out.scenario_mut(i)[off..off + dim].copy_from_slice(&mean);
        }
    }
}
