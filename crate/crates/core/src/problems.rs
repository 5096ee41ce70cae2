//! Two-stage risk and regret models, seeded instance generators and the
//! extensive-form (deterministic equivalent) oracle.
//!
//! The underlying recourse problem for first-stage `x₁` and scenario `ξ` is
//!
//! ```text
//!     f(x₁, ξ) = q(ξ)·x₁ + min { c(ξ)·x₂ : A(ξ)x₁ + B(ξ)x₂ = d(ξ), 0 ≤ x₂ ≤ u(ξ) }
//! ```
//!
//! with `x₁` in a box. The builders turn a risk or regret of `f` into a
//! [`ScenarioProgram`] whose first stage carries `x₁` and, for the regret
//! models, the trade-off variable `y`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::linalg::Matrix;
use crate::measures::{eval_risk, Measure, MeasureSpec, RandomVariable};
use crate::pha::{PhaConfig, ScenarioProgram};
use crate::probspace::{FiniteProbSpace, InformationPartition, PolicyVector, Scenario};
use crate::qpsolve::{solve_qp, QPInstance, QPSolution, QpStatus};
use crate::{Error, Result};

/// Data of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageScenario {
    pub q: Vec<f64>,
    pub c: Vec<f64>,
    pub a: Matrix,
    pub b: Matrix,
    pub d: Vec<f64>,
    /// Upper bounds on `x₂` (may be infinite); the lower bound is zero.
    pub x2_upper: Vec<f64>,
}

/// A two-stage linear program over a finite space.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageLPData {
    pub n1: usize,
    pub n2: usize,
    pub x1_lower: Vec<f64>,
    pub x1_upper: Vec<f64>,
    pub space: FiniteProbSpace,
    /// Same order as `space`.
    pub scenarios: Vec<TwoStageScenario>,
}

impl TwoStageLPData {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.len() != self.space.len() {
            return Err(Error::Dimension(format!(
                "{} scenario records for {} scenarios",
                self.scenarios.len(),
                self.space.len()
            )));
        }
        if self.x1_lower.len() != self.n1 || self.x1_upper.len() != self.n1 {
            return Err(Error::Dimension("first-stage bounds do not match n1".into()));
        }
        let rows = self.scenarios.first().map_or(0, |s| s.d.len());
        for (i, s) in self.scenarios.iter().enumerate() {
            let ok = s.q.len() == self.n1
                && s.c.len() == self.n2
                && s.x2_upper.len() == self.n2
                && s.d.len() == rows
                && s.a.rows() == rows
                && s.a.cols() == self.n1
                && s.b.rows() == rows
                && s.b.cols() == self.n2;
            if !ok {
                return Err(Error::Dimension(format!("scenario {} data does not conform", self.space.scenario(i).id)));
            }
        }
        Ok(())
    }

    /// `f(x₁, ξᵢ)`, or `None` if the recourse problem is infeasible.
    pub fn recourse_value(&self, i: usize, x1: &[f64]) -> Option<f64> {
        let s = &self.scenarios[i];
        let ax = s.a.mul_vec(x1);
        let rhs: Vec<f64> = s.d.iter().zip(&ax).map(|(d, a)| d - a).collect();
        let lp = QPInstance::new(self.n2)
            .with_objective(Matrix::zeros(self.n2, self.n2), s.c.clone())
            .with_eq(s.b.clone(), rhs)
            .with_bounds(vec![0.0; self.n2], s.x2_upper.clone());
        let sol = solve_qp(&lp, 1e-9, 10_000).ok()?;
        sol.is_optimal().then(|| dot(&s.q, x1) + lp.objective(&sol.z))
    }

    /// Risk of the recourse cost `f(x₁, ·)` under `m`: the model objective of
    /// the implementable policy that fixes `x₁` and recourses optimally.
    /// `None` if some scenario's recourse problem is infeasible.
    pub fn policy_value(&self, m: &MeasureSpec, x1: &[f64]) -> Option<f64> {
        let costs = (0..self.space.len()).map(|i| self.recourse_value(i, x1)).collect::<Option<Vec<f64>>>()?;
        let xi = RandomVariable::new(costs, self.space.probabilities().to_vec()).ok()?;
        Some(eval_risk(m, &xi))
    }

    /// Splits scenario `i` into two equally likely copies (ids `max + 1`).
    pub fn with_split_scenario(&self, i: usize) -> Result<Self> {
        let mut scen: Vec<Scenario> = self.space.scenarios().to_vec();
        let mut probs = self.space.probabilities().to_vec();
        let mut records = self.scenarios.clone();
        let new_id = scen.iter().map(|s| s.id).max().unwrap_or(0) + 1;
        probs[i] *= 0.5;
        let mut copy = scen[i].clone();
        copy.id = new_id;
        scen.push(copy);
        probs.push(probs[i]);
        records.push(records[i].clone());
        let space = FiniteProbSpace::new(scen, probs)?;
        Ok(Self { space, scenarios: records, ..self.clone() })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Variable layout shared by the builders: an optional leading `y`, then
/// `x₁` (stage 1); `x₂` then the model's auxiliary columns (stage 2).
struct Layout {
    lead: usize,
    n1: usize,
    n2: usize,
    tail: usize,
}

impl Layout {
    fn width(&self) -> usize {
        self.lead + self.n1 + self.n2 + self.tail
    }

    fn stage_dims(&self) -> Vec<usize> {
        vec![self.lead + self.n1, self.n2 + self.tail]
    }

    fn x1(&self) -> usize {
        self.lead
    }

    fn x2(&self) -> usize {
        self.lead + self.n1
    }

    fn aux(&self) -> usize {
        self.lead + self.n1 + self.n2
    }

    /// Template with the recourse rows `A x₁ + B x₂ = d` and all bounds set.
    fn base(&self, data: &TwoStageLPData, s: &TwoStageScenario) -> QPInstance {
        let n = self.width();
        let mut lb = vec![f64::NEG_INFINITY; n];
        let mut ub = vec![f64::INFINITY; n];
        lb[self.x1()..self.x2()].copy_from_slice(&data.x1_lower);
        ub[self.x1()..self.x2()].copy_from_slice(&data.x1_upper);
        for j in 0..self.n2 {
            lb[self.x2() + j] = 0.0;
            ub[self.x2() + j] = s.x2_upper[j];
        }
        for j in self.aux()..n {
            lb[j] = 0.0;
        }
        let mut t = QPInstance::new(n).with_bounds(lb, ub);
        for r in 0..s.d.len() {
            let mut row = vec![0.0; n];
            row[self.x1()..self.x2()].copy_from_slice(s.a.row(r));
            row[self.x2()..self.aux()].copy_from_slice(s.b.row(r));
            t.push_eq(&row, s.d[r]);
        }
        t
    }

    /// Coefficients of the recourse cost `q·x₁ + c·x₂` over the full layout.
    fn cost_row(&self, s: &TwoStageScenario) -> Vec<f64> {
        let mut row = vec![0.0; self.width()];
        row[self.x1()..self.x2()].copy_from_slice(&s.q);
        row[self.x2()..self.aux()].copy_from_slice(&s.c);
        row
    }
}

fn assemble(data: &TwoStageLPData, layout: &Layout, make: impl Fn(&TwoStageScenario, QPInstance) -> QPInstance) -> Result<ScenarioProgram> {
    data.validate()?;
    let templates = data.scenarios.iter().map(|s| make(s, layout.base(data, s))).collect();
    ScenarioProgram::new(
        data.space.clone(),
        InformationPartition::two_stage(data.space.len()),
        layout.stage_dims(),
        templates,
    )
}

/// Risk-neutral model `min E[q·x₁ + c·x₂]`, with `z = (x₁ | x₂)`.
pub fn build_expectation_two_stage(data: &TwoStageLPData) -> Result<ScenarioProgram> {
    let layout = Layout { lead: 0, n1: data.n1, n2: data.n2, tail: 0 };
    assemble(data, &layout, |s, t| {
        let n = layout.width();
        t.with_objective(Matrix::zeros(n, n), layout.cost_row(s))
    })
}

/// CVaR regret model with `z = (y, x₁ | x₂, s)`:
/// `min E[y + s/(1−α)]` subject to `s ≥ q·x₁ + c·x₂ − y`, `s ≥ 0`.
pub fn build_cvar_two_stage(data: &TwoStageLPData, alpha: f64) -> Result<ScenarioProgram> {
    MeasureSpec::cvar(alpha)?;
    let layout = Layout { lead: 1, n1: data.n1, n2: data.n2, tail: 1 };
    assemble(data, &layout, |s, mut t| {
        let n = layout.width();
        let mut obj = vec![0.0; n];
        obj[0] = 1.0;
        obj[layout.aux()] = 1.0 / (1.0 - alpha);
        let mut row = layout.cost_row(s);
        row[0] = -1.0;
        row[layout.aux()] = -1.0;
        t.push_ineq(&row, 0.0);
        t.with_objective(Matrix::zeros(n, n), obj)
    })
}

/// OCE regret model with `z = (y, x₁ | x₂, s₊, s₋)`:
/// `min E[y + γ₁ s₊ − γ₂ s₋]` subject to `s₊ − s₋ = q·x₁ + c·x₂ − y`.
/// Because `γ₁ > γ₂`, at most one of `s₊, s₋` is positive at an optimum.
pub fn build_oce_two_stage(data: &TwoStageLPData, gamma1: f64, gamma2: f64) -> Result<ScenarioProgram> {
    MeasureSpec::oce(gamma1, gamma2)?;
    let layout = Layout { lead: 1, n1: data.n1, n2: data.n2, tail: 2 };
    assemble(data, &layout, |s, mut t| {
        let n = layout.width();
        let mut obj = vec![0.0; n];
        obj[0] = 1.0;
        obj[layout.aux()] = gamma1;
        obj[layout.aux() + 1] = -gamma2;
        let mut row = layout.cost_row(s);
        row[0] = -1.0;
        row[layout.aux()] = -1.0;
        row[layout.aux() + 1] = 1.0;
        t.push_eq(&row, 0.0);
        t.with_objective(Matrix::zeros(n, n), obj)
    })
}

/// Dispatches on the measure; only the two-stage models above are available.
pub fn build_two_stage(data: &TwoStageLPData, m: &MeasureSpec) -> Result<ScenarioProgram> {
    match m.measure() {
        Measure::Expectation => build_expectation_two_stage(data),
        Measure::Cvar { alpha } => build_cvar_two_stage(data, alpha),
        Measure::Oce { gamma1, gamma2 } => build_oce_two_stage(data, gamma1, gamma2),
        other => Err(Error::UnsupportedMeasure(format!("no two-stage builder for {}", other.kind_name()))),
    }
}

/// Index of `x₁` inside the first-stage block of a built program.
pub fn first_stage_x1_range(m: &MeasureSpec, n1: usize) -> core::ops::Range<usize> {
    let lead = usize::from(!matches!(m.measure(), Measure::Expectation));
    lead..lead + n1
}

/// Seat capacity of the single flight.
pub const AIRLINE_CAPACITY: f64 = 5.0;
/// Revenue per unit for economy, business and premier seats.
pub const AIRLINE_REVENUE: [f64; 3] = [50.0, 130.0, 100.0];
/// Mean and standard deviation of business and premier demand.
pub const AIRLINE_DEMAND: [(f64, f64); 2] = [(0.9, 0.1), (2.3, 0.2)];
/// First-stage cap on economy seats.
pub const AIRLINE_ECONOMY_CAP: f64 = 4.0;

/// Single-flight seat allocation: economy seats `x ∈ [0, 4]` are fixed first,
/// then business and premier seats up to the sampled demands. Capacity is an
/// equality with an unpriced slack column, so `x₂ = (b, p, slack)`.
pub fn gen_airline_instance(sn: usize, seed: u64) -> Result<TwoStageLPData> {
    if sn == 0 {
        return Err(Error::Config("sn must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normals: Vec<Normal<f64>> = AIRLINE_DEMAND
        .iter()
        .map(|&(m, s)| Normal::new(m, s).expect("valid normal parameters"))
        .collect();
    let mut demands = Vec::with_capacity(sn);
    for _ in 0..sn {
        let b = normals[0].sample(&mut rng).max(0.0);
        let p = normals[1].sample(&mut rng).max(0.0);
        demands.push([b, p]);
    }
    Ok(airline_from_demands(&demands))
}

/// Airline instance for an explicit demand table, equiprobable scenarios.
pub fn airline_from_demands(demands: &[[f64; 2]]) -> TwoStageLPData {
    let scen = demands
        .iter()
        .enumerate()
        .map(|(i, d)| Scenario::new(i as u64, vec![d.to_vec(), Vec::new()]))
        .collect();
    let space = FiniteProbSpace::uniform(scen).expect("at least one scenario");
    let scenarios = demands
        .iter()
        .map(|d| TwoStageScenario {
            q: vec![-AIRLINE_REVENUE[0]],
            c: vec![-AIRLINE_REVENUE[1], -AIRLINE_REVENUE[2], 0.0],
            a: Matrix::from_rows(&[vec![1.0]]),
            b: Matrix::from_rows(&[vec![1.0, 1.0, 1.0]]),
            d: vec![AIRLINE_CAPACITY],
            x2_upper: vec![d[0], d[1], f64::INFINITY],
        })
        .collect();
    TwoStageLPData {
        n1: 1,
        n2: 3,
        x1_lower: vec![0.0],
        x1_upper: vec![AIRLINE_ECONOMY_CAP],
        space,
        scenarios,
    }
}

/// Random two-stage LP with relatively complete recourse.
///
/// With `m = ⌈n₂/2⌉` rows, `B = [I | B̃]` with `B̃ ≥ 0`, `A ≥ 0`, `x₁ ∈ [0,1]`
/// and `d ≥ A·1 + 0.5`, the identity columns absorb `d − A x₁ ≥ 0` for every
/// feasible `x₁`. Costs are uniform on `[0, 10]`.
pub fn gen_random_instance(n1: usize, n2: usize, sn: usize, seed: u64) -> Result<TwoStageLPData> {
    if n1 == 0 || n2 == 0 || sn == 0 {
        return Err(Error::Config(format!("dimensions and sn must be positive, got [{n1},{n2}] sn={sn}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = n2.div_ceil(2);
    let mut scen = Vec::with_capacity(sn);
    let mut records = Vec::with_capacity(sn);
    for i in 0..sn {
        let q: Vec<f64> = (0..n1).map(|_| rng.random_range(0.0..=10.0)).collect();
        let c: Vec<f64> = (0..n2).map(|_| rng.random_range(0.0..=10.0)).collect();
        let mut a = Matrix::zeros(m, n1);
        let mut b = Matrix::zeros(m, n2);
        let mut d = vec![0.0; m];
        for r in 0..m {
            for j in 0..n1 {
                a[(r, j)] = rng.random_range(0.0..1.0);
            }
            b[(r, r)] = 1.0;
            for j in m..n2 {
                b[(r, j)] = rng.random_range(0.0..1.0);
            }
            d[r] = a.row(r).iter().sum::<f64>() + rng.random_range(0.5..2.0);
        }
        let mut fingerprint = q.clone();
        fingerprint.extend_from_slice(&c);
        fingerprint.extend_from_slice(&d);
        scen.push(Scenario::new(i as u64, vec![fingerprint, Vec::new()]));
        records.push(TwoStageScenario { q, c, a, b, d, x2_upper: vec![f64::INFINITY; n2] });
    }
    Ok(TwoStageLPData {
        n1,
        n2,
        x1_lower: vec![0.0; n1],
        x1_upper: vec![1.0; n1],
        space: FiniteProbSpace::uniform(scen)?,
        scenarios: records,
    })
}

/// Where an experiment's instances come from.
#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    Airline,
    Random { n1: usize, n2: usize },
    Fixed(TwoStageLPData),
}

/// One experiment cell: a model, an instance family and solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub measure: MeasureSpec,
    pub source: InstanceSource,
    pub sn: usize,
    pub seed: u64,
    pub pha: PhaConfig,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sn == 0 {
            return Err(Error::Config("sn must be at least 1".into()));
        }
        self.pha.validate()
    }

    /// Seed of the `k`-th repeat.
    pub fn repeat_seed(&self, k: usize) -> u64 {
        self.seed.wrapping_add(k as u64)
    }

    pub fn instance(&self, k: usize) -> Result<TwoStageLPData> {
        match &self.source {
            InstanceSource::Airline => gen_airline_instance(self.sn, self.repeat_seed(k)),
            InstanceSource::Random { n1, n2 } => gen_random_instance(*n1, *n2, self.sn, self.repeat_seed(k)),
            InstanceSource::Fixed(d) => Ok(d.clone()),
        }
    }
}

/// Dense size guard for [`build_extensive_form`].
pub const EXTENSIVE_VAR_LIMIT: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq)]
enum RowKind {
    Eq,
    Ineq,
}

/// The coefficients one scenario contributes to one row of the extensive form.
#[derive(Debug, Clone, PartialEq)]
struct RowPart {
    kind: RowKind,
    row: usize,
    scenario: usize,
    coefs: Vec<f64>,
}

/// Deterministic equivalent of a [`ScenarioProgram`]: one column per
/// (stage, information class, coordinate), objectives weighted by `p(ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensiveForm {
    pub qp: QPInstance,
    /// `columns[i][j]`: column of scenario `i`'s local variable `j`.
    pub columns: Vec<Vec<usize>>,
    parts: Vec<RowPart>,
}

/// Solution of the extensive form mapped back to scenario policies.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensiveSolution {
    pub objective: f64,
    pub z: PolicyVector,
    /// Nonanticipativity multipliers recovered from the KKT system, in `M`.
    pub v: PolicyVector,
    pub qp: QPSolution,
}

pub fn build_extensive_form(prog: &ScenarioProgram) -> Result<ExtensiveForm> {
    let n_s = prog.n_scenarios();
    let width = prog.width();
    let mut columns = vec![vec![0usize; width]; n_s];
    let mut n_cols = 0;
    let mut offset = 0;
    for (k, &dim) in prog.stage_dims.iter().enumerate() {
        let stage = k + 1;
        for class in prog.partition.classes(stage) {
            for j in 0..dim {
                for &i in class {
                    columns[i][offset + j] = n_cols + j;
                }
            }
            n_cols += dim;
        }
        offset += dim;
    }
    if n_cols > EXTENSIVE_VAR_LIMIT {
        return Err(Error::TooLarge { vars: n_cols, limit: EXTENSIVE_VAR_LIMIT });
    }

    let mut hess = Matrix::zeros(n_cols, n_cols);
    let mut lin = vec![0.0; n_cols];
    let mut lb = vec![f64::NEG_INFINITY; n_cols];
    let mut ub = vec![f64::INFINITY; n_cols];
    let mut qp = QPInstance::new(n_cols);
    let mut parts = Vec::new();
    for i in 0..n_s {
        let p = prog.space.prob(i);
        let t = &prog.templates[i];
        let col = &columns[i];
        for a in 0..width {
            lin[col[a]] += p * t.linear[a];
            lb[col[a]] = lb[col[a]].max(t.lb[a]);
            ub[col[a]] = ub[col[a]].min(t.ub[a]);
            for b in 0..width {
                hess[(col[a], col[b])] += p * t.hessian[(a, b)];
            }
        }
        for r in 0..t.b_eq.len() {
            qp.push_eq(&scatter(t.a_eq.row(r), col, n_cols), t.b_eq[r]);
            parts.push(RowPart { kind: RowKind::Eq, row: qp.b_eq.len() - 1, scenario: i, coefs: t.a_eq.row(r).to_vec() });
        }
        for r in 0..t.b_in.len() {
            qp.push_ineq(&scatter(t.a_in.row(r), col, n_cols), t.b_in[r]);
            parts.push(RowPart {
                kind: RowKind::Ineq,
                row: qp.b_in.len() - 1,
                scenario: i,
                coefs: t.a_in.row(r).to_vec(),
            });
        }
    }
    // Symmetrize against accumulated rounding.
    for a in 0..n_cols {
        for b in a + 1..n_cols {
            let m = 0.5 * (hess[(a, b)] + hess[(b, a)]);
            hess[(a, b)] = m;
            hess[(b, a)] = m;
        }
    }
    qp.hessian = hess;
    qp.linear = lin;
    qp.lb = lb;
    qp.ub = ub;
    Ok(ExtensiveForm { qp, columns, parts })
}

fn scatter(local: &[f64], col: &[usize], n_cols: usize) -> Vec<f64> {
    let mut row = vec![0.0; n_cols];
    for (j, v) in local.iter().enumerate() {
        row[col[j]] += v;
    }
    row
}

impl ExtensiveForm {
    pub fn n_vars(&self) -> usize {
        self.qp.dim()
    }

    /// Adds `E[a(ξ)·z(ξ)] ≤ rhs`, with one local coefficient vector per scenario.
    pub fn push_expectation_ineq(&mut self, prog: &ScenarioProgram, coefs: &[Vec<f64>], rhs: f64) {
        self.push_expectation(prog, coefs, rhs, RowKind::Ineq);
    }

    /// Adds `E[a(ξ)·z(ξ)] = rhs`.
    pub fn push_expectation_eq(&mut self, prog: &ScenarioProgram, coefs: &[Vec<f64>], rhs: f64) {
        self.push_expectation(prog, coefs, rhs, RowKind::Eq);
    }

    fn push_expectation(&mut self, prog: &ScenarioProgram, coefs: &[Vec<f64>], rhs: f64, kind: RowKind) {
        let n = self.n_vars();
        let mut row = vec![0.0; n];
        for (i, a) in coefs.iter().enumerate() {
            let p = prog.space.prob(i);
            for (j, v) in a.iter().enumerate() {
                row[self.columns[i][j]] += p * v;
            }
        }
        let r = match kind {
            RowKind::Eq => {
                self.qp.push_eq(&row, rhs);
                self.qp.b_eq.len() - 1
            }
            RowKind::Ineq => {
                self.qp.push_ineq(&row, rhs);
                self.qp.b_in.len() - 1
            }
        };
        for (i, a) in coefs.iter().enumerate() {
            let p = prog.space.prob(i);
            self.parts.push(RowPart { kind, row: r, scenario: i, coefs: a.iter().map(|v| p * v).collect() });
        }
    }

    /// Solves the stacked QP and splits the answer by scenario.
    pub fn solve(&self, prog: &ScenarioProgram, tol: f64) -> Result<ExtensiveSolution> {
        let sol = solve_qp(&self.qp, tol, 100_000)?;
        match &sol.status {
            QpStatus::Optimal => {}
            QpStatus::Infeasible { certificate } => {
                return Err(Error::NoConvergence(format!("extensive form infeasible: {certificate}")))
            }
            QpStatus::Unbounded => return Err(Error::UnboundedBelow),
            QpStatus::MaxIter => {
                return Err(Error::NoConvergence(format!(
                    "extensive form not solved (KKT residual {:e})",
                    sol.kkt_residual
                )))
            }
        }
        let n_s = prog.n_scenarios();
        let mut z = prog.zeros();
        for i in 0..n_s {
            for (j, &c) in self.columns[i].iter().enumerate() {
                z.scenario_mut(i)[j] = sol.z[c];
            }
        }
        let v = self.multipliers(prog, &z, &sol);
        Ok(ExtensiveSolution { objective: self.qp.objective(&sol.z), z, v, qp: sol })
    }

    /// `v(ξ) = −(∇g(z(ξ), ξ) + (row multipliers)/p(ξ) + bound share)`, then
    /// projected onto `M` to remove rounding. A shared bound multiplier is
    /// split over the scenarios whose own bound is the binding one, in
    /// proportion to their probability.
    fn multipliers(&self, prog: &ScenarioProgram, z: &PolicyVector, sol: &QPSolution) -> PolicyVector {
        let n_s = prog.n_scenarios();
        let width = prog.width();
        let mut raw = prog.zeros();
        for i in 0..n_s {
            let t = &prog.templates[i];
            let g = t.hessian.mul_vec(z.scenario(i));
            for j in 0..width {
                raw.scenario_mut(i)[j] = g[j] + t.linear[j];
            }
        }
        for part in &self.parts {
            let mu = match part.kind {
                RowKind::Eq => sol.duals.eq[part.row],
                RowKind::Ineq => sol.duals.ineq[part.row],
            };
            if mu == 0.0 {
                continue;
            }
            let p = prog.space.prob(part.scenario);
            for (j, a) in part.coefs.iter().enumerate() {
                raw.scenario_mut(part.scenario)[j] += a * mu / p;
            }
        }
        let n_cols = self.n_vars();
        let mut lower_mass = vec![0.0; n_cols];
        let mut upper_mass = vec![0.0; n_cols];
        for i in 0..n_s {
            let t = &prog.templates[i];
            for j in 0..width {
                let c = self.columns[i][j];
                if t.lb[j] == self.qp.lb[c] {
                    lower_mass[c] += prog.space.prob(i);
                }
                if t.ub[j] == self.qp.ub[c] {
                    upper_mass[c] += prog.space.prob(i);
                }
            }
        }
        for i in 0..n_s {
            let t = &prog.templates[i];
            for j in 0..width {
                let c = self.columns[i][j];
                if t.lb[j] == self.qp.lb[c] && sol.duals.lower[c] != 0.0 {
                    raw.scenario_mut(i)[j] -= sol.duals.lower[c] / lower_mass[c];
                }
                if t.ub[j] == self.qp.ub[c] && sol.duals.upper[c] != 0.0 {
                    raw.scenario_mut(i)[j] += sol.duals.upper[c] / upper_mass[c];
                }
            }
        }
        prog.project_m(&raw.scaled(-1.0))
    }
}

/// Builds and solves the deterministic equivalent.
pub fn solve_extensive(prog: &ScenarioProgram, tol: f64) -> Result<ExtensiveSolution> {
    build_extensive_form(prog)?.solve(prog, tol)
}
