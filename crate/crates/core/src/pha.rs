//! Progressive hedging for `min E[g(z(ξ), ξ)]` over `z(ξ) ∈ C(ξ)`, `z ∈ N`.
//!
//! Each iteration solves one strongly convex QP per scenario,
//!
//! ```text
//!     ẑ(ξ) = argmin_{z ∈ C(ξ)}  g(z, ξ) + v(ξ)·z + r/2 ‖z − z(ξ)‖²,
//! ```
//!
//! then projects: `z⁺ = P_N ẑ` and `v⁺ = v + r P_M ẑ`. The per-scenario solves
//! are independent and are dispatched through a [`ScenarioMap`], which lets a
//! caller with threads run them in parallel.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::probspace::{norm, project_m, project_n, FiniteProbSpace, InformationPartition, PolicyVector};
use crate::qpsolve::{solve_qp_warm, ActiveSet, QPInstance, QPSolution, QpStatus, DEFAULT_TOL};
use crate::{Error, Result};

/// Runs one closure per scenario index and collects the results in order.
pub trait ScenarioMap: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Plain loop; the default executor.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl ScenarioMap for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

/// Per-scenario convex QP data over a common stage layout.
///
/// `templates[i]` holds `g(·, ξᵢ)` as its objective and `C(ξᵢ)` as its
/// constraints, with variables ordered stage by stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioProgram {
    pub space: FiniteProbSpace,
    pub partition: InformationPartition,
    pub stage_dims: Vec<usize>,
    pub templates: Vec<QPInstance>,
}

impl ScenarioProgram {
    pub fn new(
        space: FiniteProbSpace,
        partition: InformationPartition,
        stage_dims: Vec<usize>,
        templates: Vec<QPInstance>,
    ) -> Result<Self> {
        if templates.len() != space.len() || partition.n_scenarios() != space.len() {
            return Err(Error::Dimension(format!(
                "{} templates and a partition over {} scenarios for a space of {}",
                templates.len(),
                partition.n_scenarios(),
                space.len()
            )));
        }
        if partition.stages() != stage_dims.len() {
            return Err(Error::Dimension(format!(
                "partition has {} stages, layout has {}",
                partition.stages(),
                stage_dims.len()
            )));
        }
        let width: usize = stage_dims.iter().sum();
        for (i, t) in templates.iter().enumerate() {
            t.validate()?;
            if t.dim() != width {
                return Err(Error::Dimension(format!(
                    "scenario {} template has {} variables, layout has {width}",
                    space.scenario(i).id,
                    t.dim()
                )));
            }
        }
        Ok(Self { space, partition, stage_dims, templates })
    }

    pub fn width(&self) -> usize {
        self.stage_dims.iter().sum()
    }

    pub fn n_scenarios(&self) -> usize {
        self.space.len()
    }

    pub fn zeros(&self) -> PolicyVector {
        PolicyVector::zeros(self.n_scenarios(), &self.stage_dims)
    }

    /// `E[g(z(ξ), ξ)]`.
    pub fn objective(&self, z: &PolicyVector) -> f64 {
        (0..self.n_scenarios()).map(|i| self.space.prob(i) * self.templates[i].objective(z.scenario(i))).sum()
    }

    /// Largest violation of any `C(ξ)` by `z`.
    pub fn max_violation(&self, z: &PolicyVector) -> f64 {
        (0..self.n_scenarios()).map(|i| self.templates[i].max_violation(z.scenario(i))).fold(0.0, f64::max)
    }

    pub fn project_n(&self, x: &PolicyVector) -> PolicyVector {
        project_n(x, &self.partition, &self.space).expect("policy built from this program")
    }

    pub fn project_m(&self, x: &PolicyVector) -> PolicyVector {
        project_m(x, &self.partition, &self.space).expect("policy built from this program")
    }

    pub fn norm(&self, x: &PolicyVector) -> f64 {
        norm(x, &self.space).expect("policy built from this program")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaConfig {
    /// Proximal and penalty parameter `r > 0`.
    pub r: f64,
    /// Stop once the combined residual is at most this.
    pub tol: f64,
    pub max_iter: usize,
    /// Carried into logs; the algorithm itself is deterministic.
    pub seed: u64,
    /// Double `r` when the primal residual dominates the dual one tenfold,
    /// halve it in the opposite case, staying within a factor 100 of `r`.
    pub adaptive_r: bool,
    /// Tolerance for the scenario QPs.
    pub qp_tol: f64,
    /// Active-set change cap for the scenario QPs.
    pub qp_max_iter: usize,
}

impl Default for PhaConfig {
    fn default() -> Self {
        Self { r: 1.0, tol: 1e-6, max_iter: 1000, seed: 0, adaptive_r: false, qp_tol: DEFAULT_TOL, qp_max_iter: 10_000 }
    }
}

impl PhaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::Config(format!("r must be positive, got {}", self.r)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.qp_tol > 0.0) {
            return Err(Error::Config(format!("qp_tol must be positive, got {}", self.qp_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// `‖ẑ − P_N ẑ‖`.
    pub primal_residual: f64,
    /// `‖z⁺ − z‖`.
    pub dual_residual: f64,
    pub combined: f64,
    /// `E[g]` at the projected iterate `z⁺`.
    pub objective: f64,
    /// Penalty parameter used for this iteration.
    pub r: f64,
}

/// Iterate of the algorithm: `z ∈ N`, `v ∈ M`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaState {
    pub z: PolicyVector,
    pub v: PolicyVector,
    /// Scenario solutions of the last Step 1, if any.
    pub z_hat: Option<PolicyVector>,
    pub iter: usize,
    pub r: f64,
    pub log: Vec<IterationRecord>,
    hints: Vec<ActiveSet>,
}

impl PhaState {
    /// Starts from a given pair, projecting `z` onto `N` and `v` onto `M`.
    pub fn new(prog: &ScenarioProgram, z: PolicyVector, v: PolicyVector, r: f64) -> Result<Self> {
        let shape = prog.zeros();
        if !z.same_shape(&shape) || !v.same_shape(&shape) {
            return Err(Error::Dimension("initial pair does not match the program layout".into()));
        }
        Ok(Self {
            z: prog.project_n(&z),
            v: prog.project_m(&v),
            z_hat: None,
            iter: 0,
            r,
            log: Vec::new(),
            hints: vec![ActiveSet::default(); prog.n_scenarios()],
        })
    }
}

/// Residuals of the step from `prev` to `next`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub combined: f64,
}

/// `primal = ‖ẑ − P_N ẑ‖`, `dual = ‖z⁺ − z‖` and their root sum of squares, all
/// in the expectation norm. `ẑ` is taken from `next.z_hat`.
pub fn compute_residuals(prog: &ScenarioProgram, prev: &PhaState, next: &PhaState) -> Residuals {
    residuals_of(prog, next.z_hat.as_ref(), &prev.z, &next.z)
}

fn residuals_of(prog: &ScenarioProgram, z_hat: Option<&PolicyVector>, prev: &PolicyVector, next: &PolicyVector) -> Residuals {
    let primal = z_hat.map_or(0.0, |zh| prog.norm(&prog.project_m(zh)));
    let dual = prog.norm(&next.sub(prev));
    Residuals { primal, dual, combined: libm::hypot(primal, dual) }
}

/// The Step-1 QP for scenario `i`: objective `g + v·z + r/2 ‖z − z_k‖²` (the
/// constant `r/2 ‖z_k‖²` dropped) over `C(ξᵢ)`.
pub fn assemble_subproblem(prog: &ScenarioProgram, i: usize, z_k: &[f64], v_k: &[f64], r: f64) -> QPInstance {
    proximal_instance(&prog.templates[i], z_k, v_k, r)
}

pub(crate) fn proximal_instance(template: &QPInstance, center: &[f64], shift: &[f64], r: f64) -> QPInstance {
    let mut inst = template.clone();
    let n = inst.dim();
    let mut h = Matrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            h[(a, b)] = template.hessian[(a, b)];
        }
        h[(a, a)] += r;
        inst.linear[a] += shift[a] - r * center[a];
    }
    inst.hessian = h;
    inst
}

pub(crate) fn solve_scenario(
    inst: &QPInstance,
    id: u64,
    hint: &ActiveSet,
    tol: f64,
    max_iter: usize,
) -> Result<QPSolution> {
    let sol = solve_qp_warm(inst, tol, max_iter, hint)?;
    match sol.status {
        QpStatus::Optimal => Ok(sol),
        QpStatus::Infeasible { .. } => Err(Error::ScenarioInfeasible { id }),
        QpStatus::MaxIter | QpStatus::Unbounded => Err(Error::ScenarioNotSolved { id }),
    }
}

/// Starting point: `z⁰ = P_N` of the scenario-wise minimizers of `g` over
/// `C(ξ)` when every one of them solves, otherwise zero; `v⁰ = 0`.
pub fn pha_init<E: ScenarioMap>(prog: &ScenarioProgram, cfg: &PhaConfig, exec: &E) -> Result<PhaState> {
    cfg.validate()?;
    let sols = exec.map(prog.n_scenarios(), |i| {
        solve_qp_warm(&prog.templates[i], cfg.qp_tol, 500, &ActiveSet::default()).ok().filter(QPSolution::is_optimal)
    });
    let mut state = PhaState::new(prog, prog.zeros(), prog.zeros(), cfg.r)?;
    if sols.iter().all(Option::is_some) {
        let mut z = prog.zeros();
        for (i, s) in sols.into_iter().enumerate() {
            let s = s.expect("checked");
            z.scenario_mut(i).copy_from_slice(&s.z);
            state.hints[i] = s.active;
        }
        state.z = prog.project_n(&z);
    }
    Ok(state)
}

/// One full iteration (Step 1 then Step 2) run sequentially. The state is
/// consumed so its log can grow in place.
pub fn pha_iterate(prog: &ScenarioProgram, state: PhaState, cfg: &PhaConfig) -> Result<PhaState> {
    pha_iterate_with(prog, state, cfg, &Sequential)
}

pub fn pha_iterate_with<E: ScenarioMap>(
    prog: &ScenarioProgram,
    state: PhaState,
    cfg: &PhaConfig,
    exec: &E,
) -> Result<PhaState> {
    let r = state.r;
    let sols = exec.map(prog.n_scenarios(), |i| {
        let inst = assemble_subproblem(prog, i, state.z.scenario(i), state.v.scenario(i), r);
        solve_scenario(&inst, prog.space.scenario(i).id, &state.hints[i], cfg.qp_tol, cfg.qp_max_iter)
    });
    let mut z_hat = prog.zeros();
    let mut hints = Vec::with_capacity(sols.len());
    for (i, s) in sols.into_iter().enumerate() {
        let s = s?;
        z_hat.scenario_mut(i).copy_from_slice(&s.z);
        hints.push(s.active);
    }

    let z = prog.project_n(&z_hat);
    let v = state.v.add_scaled(r, &prog.project_m(&z_hat));
    let res = residuals_of(prog, Some(&z_hat), &state.z, &z);
    let iter = state.iter + 1;
    let mut log = state.log;
    log.push(IterationRecord {
        iter,
        primal_residual: res.primal,
        dual_residual: res.dual,
        combined: res.combined,
        objective: prog.objective(&z),
        r,
    });
    Ok(PhaState { z, v, z_hat: Some(z_hat), iter, r: adapt_r(cfg, r, res.primal, res.dual), log, hints })
}

pub(crate) fn adapt_r(cfg: &PhaConfig, r: f64, primal: f64, dual: f64) -> f64 {
    if !cfg.adaptive_r {
        return r;
    }
    let next = if primal > 10.0 * dual {
        r * 2.0
    } else if dual > 10.0 * primal {
        r * 0.5
    } else {
        r
    };
    next.clamp(cfg.r * 1e-2, cfg.r * 1e2)
}

/// Final state of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaOutcome {
    pub z: PolicyVector,
    pub v: PolicyVector,
    pub log: Vec<IterationRecord>,
    /// Whether the combined residual reached `cfg.tol`; otherwise `z`, `v` are
    /// the last iterate.
    pub converged: bool,
    pub objective: f64,
}

impl PhaOutcome {
    pub fn iterations(&self) -> usize {
        self.log.len()
    }
}

/// Runs to convergence sequentially.
pub fn pha_solve(prog: &ScenarioProgram, cfg: &PhaConfig) -> Result<PhaOutcome> {
    pha_solve_with(prog, cfg, &Sequential, |_| {})
}

/// Runs to convergence, dispatching scenario solves through `exec` and
/// reporting every iteration to `observer`.
pub fn pha_solve_with<E, O>(prog: &ScenarioProgram, cfg: &PhaConfig, exec: &E, mut observer: O) -> Result<PhaOutcome>
where
    E: ScenarioMap,
    O: FnMut(&IterationRecord),
{
    let mut state = pha_init(prog, cfg, exec)?;
    let mut converged = false;
    while state.iter < cfg.max_iter {
        state = pha_iterate_with(prog, state, cfg, exec)?;
        let rec = *state.log.last().expect("one record per iteration");
        observer(&rec);
        if rec.combined <= cfg.tol {
            converged = true;
            break;
        }
    }
    let objective = prog.objective(&state.z);
    Ok(PhaOutcome { z: state.z, v: state.v, log: state.log, converged, objective })
}
