//! Progressive hedging with expectation constraints `E[h̄(z(ξ), ξ)] ≤ 0`.
//!
//! Such a constraint couples all scenarios, so it cannot sit inside `C(ξ)`.
//! Lifting with `u(ξ) ∈ ℝᵏ` turns it into the scenario-wise rows
//! `h̄(z(ξ), ξ) ≤ u(ξ)` plus the linear condition `E[u] = 0`, which joins
//! nonanticipativity: the iterate lives in `N′ = {(z, u) : z ∈ N, E[u] = 0}`
//! and the multiplier in `M′ = {(v, w) : v ∈ M, w constant}`. The algorithm is
//! then plain progressive hedging on the lifted program, with
//!
//! ```text
//!     z⁺ = P_N ẑ,    u⁺ = û − E[û],    v⁺ = v + r P_M ẑ,    w⁺ = w + r E[û].
//! ```
//!
//! Only affine `h̄(z, ξ) = H(ξ) z + h₀(ξ)` is supported, so every subproblem
//! stays a QP.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{dot, norm2, Matrix};
use crate::pha::{
    adapt_r, pha_init, proximal_instance, solve_scenario, IterationRecord, PhaConfig, ScenarioMap, ScenarioProgram, Sequential,
};
use crate::probspace::{InformationPartition, PolicyVector};
use crate::problems::{build_extensive_form, ExtensiveForm};
use crate::qpsolve::{ActiveSet, QPInstance};
use crate::{Error, Result};

/// Affine expectation constraint `E[H(ξ) z(ξ) + h₀(ξ)] ≤ 0` with `k` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ExFunlConstraint {
    coefs: Vec<Matrix>,
    offsets: Vec<Vec<f64>>,
}

impl ExFunlConstraint {
    /// One `k × n` matrix and one length-`k` offset per scenario.
    pub fn new(coefs: Vec<Matrix>, offsets: Vec<Vec<f64>>) -> Result<Self> {
        let k = coefs.first().map_or(0, Matrix::rows);
        if coefs.is_empty() || k == 0 {
            return Err(Error::Dimension("an expectation constraint needs at least one row".into()));
        }
        if coefs.len() != offsets.len() {
            return Err(Error::Dimension(format!("{} matrices but {} offsets", coefs.len(), offsets.len())));
        }
        let n = coefs[0].cols();
        for (h, h0) in coefs.iter().zip(&offsets) {
            if h.rows() != k || h.cols() != n || h0.len() != k {
                return Err(Error::Dimension("constraint rows differ across scenarios".into()));
            }
        }
        Ok(Self { coefs, offsets })
    }

    /// The same map in every scenario.
    pub fn uniform(n_scenarios: usize, h: Matrix, h0: Vec<f64>) -> Result<Self> {
        Self::new(vec![h; n_scenarios], vec![h0; n_scenarios])
    }

    pub fn k(&self) -> usize {
        self.offsets[0].len()
    }

    pub fn width(&self) -> usize {
        self.coefs[0].cols()
    }

    pub fn n_scenarios(&self) -> usize {
        self.coefs.len()
    }

    pub fn coefs(&self, i: usize) -> &Matrix {
        &self.coefs[i]
    }

    pub fn offset(&self, i: usize) -> &[f64] {
        &self.offsets[i]
    }

    /// `h̄(z(ξᵢ), ξᵢ)`.
    pub fn eval(&self, i: usize, z: &[f64]) -> Vec<f64> {
        let mut out = self.coefs[i].mul_vec(z);
        for (o, c) in out.iter_mut().zip(&self.offsets[i]) {
            *o += c;
        }
        out
    }

    /// `E[h̄(z(ξ), ξ)]`.
    pub fn expectation(&self, probs: &[f64], z: &PolicyVector) -> Vec<f64> {
        let mut acc = vec![0.0; self.k()];
        for (i, p) in probs.iter().enumerate() {
            for (a, h) in acc.iter_mut().zip(self.eval(i, z.scenario(i))) {
                *a += p * h;
            }
        }
        acc
    }

    /// Largest positive part of `E[h̄]`, zero when feasible.
    pub fn max_violation(&self, probs: &[f64], z: &PolicyVector) -> f64 {
        self.expectation(probs, z).into_iter().fold(0.0, f64::max)
    }
}

/// The lifted program: variables `η(ξ) = (z(ξ), u(ξ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedProgram {
    pub base: ScenarioProgram,
    pub cons: ExFunlConstraint,
    /// Lifted templates, with `u` placed in an extra stage of singleton
    /// classes. Its own `N` is not `N′`; the algorithm projects the `u` block
    /// by recentering instead.
    pub program: ScenarioProgram,
}

impl LiftedProgram {
    pub fn k(&self) -> usize {
        self.cons.k()
    }

    /// Width of the original `z`.
    pub fn z_width(&self) -> usize {
        self.base.width()
    }

    pub fn zero_u(&self) -> PolicyVector {
        PolicyVector::zeros(self.base.n_scenarios(), &[self.k()])
    }

    /// Deterministic equivalent of the lifted problem: per-scenario rows
    /// `h̄ ≤ u` and the averaged row `E[u] = 0`.
    pub fn extensive_form(&self) -> Result<ExtensiveForm> {
        let mut ef = build_extensive_form(&self.program)?;
        let n = self.z_width();
        for j in 0..self.k() {
            let coefs: Vec<Vec<f64>> = (0..self.base.n_scenarios())
                .map(|_| {
                    let mut a = vec![0.0; n + self.k()];
                    a[n + j] = 1.0;
                    a
                })
                .collect();
            ef.push_expectation_eq(&self.program, &coefs, 0.0);
        }
        Ok(ef)
    }
}

/// Deterministic equivalent of the original problem with the averaged rows
/// `E[H z] ≤ −E[h₀]` stated directly.
pub fn averaged_extensive_form(prog: &ScenarioProgram, cons: &ExFunlConstraint) -> Result<ExtensiveForm> {
    check_conforms(prog, cons)?;
    let mut ef = build_extensive_form(prog)?;
    let probs = prog.space.probabilities();
    for j in 0..cons.k() {
        let coefs: Vec<Vec<f64>> = (0..prog.n_scenarios()).map(|i| cons.coefs(i).row(j).to_vec()).collect();
        let rhs: f64 = -probs.iter().enumerate().map(|(i, p)| p * cons.offset(i)[j]).sum::<f64>();
        ef.push_expectation_ineq(prog, &coefs, rhs);
    }
    Ok(ef)
}

fn check_conforms(prog: &ScenarioProgram, cons: &ExFunlConstraint) -> Result<()> {
    if cons.n_scenarios() != prog.n_scenarios() || cons.width() != prog.width() {
        return Err(Error::Dimension(format!(
            "constraint is {} scenarios × width {}, program is {} × {}",
            cons.n_scenarios(),
            cons.width(),
            prog.n_scenarios(),
            prog.width()
        )));
    }
    Ok(())
}

/// Appends `u(ξ) ∈ ℝᵏ` to every scenario and the rows `H(ξ) z − u ≤ −h₀(ξ)`.
pub fn lift_instance(prog: &ScenarioProgram, cons: &ExFunlConstraint) -> Result<LiftedProgram> {
    check_conforms(prog, cons)?;
    let n = prog.width();
    let k = cons.k();
    let templates = prog
        .templates
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut hess = Matrix::zeros(n + k, n + k);
            for a in 0..n {
                for b in 0..n {
                    hess[(a, b)] = t.hessian[(a, b)];
                }
            }
            let widen = |m: &Matrix| {
                let mut out = Matrix::zeros(m.rows(), n + k);
                for r in 0..m.rows() {
                    out.row_mut(r)[..n].copy_from_slice(m.row(r));
                }
                out
            };
            let mut lin = t.linear.clone();
            lin.resize(n + k, 0.0);
            let mut lb = t.lb.clone();
            lb.resize(n + k, f64::NEG_INFINITY);
            let mut ub = t.ub.clone();
            ub.resize(n + k, f64::INFINITY);
            let mut lifted = QPInstance::new(n + k)
                .with_objective(hess, lin)
                .with_eq(widen(&t.a_eq), t.b_eq.clone())
                .with_ineq(widen(&t.a_in), t.b_in.clone())
                .with_bounds(lb, ub);
            let h = cons.coefs(i);
            for j in 0..k {
                let mut row = h.row(j).to_vec();
                row.resize(n + k, 0.0);
                row[n + j] = -1.0;
                lifted.push_ineq(&row, -cons.offset(i)[j]);
            }
            lifted
        })
        .collect();

    let mut classes: Vec<Vec<Vec<usize>>> = (1..=prog.partition.stages()).map(|s| prog.partition.classes(s).to_vec()).collect();
    classes.push((0..prog.n_scenarios()).map(|i| vec![i]).collect());
    let partition = InformationPartition::new(prog.n_scenarios(), classes)?;
    let mut dims = prog.stage_dims.clone();
    dims.push(k);
    let program = ScenarioProgram::new(prog.space.clone(), partition, dims, templates)?;
    Ok(LiftedProgram { base: prog.clone(), cons: cons.clone(), program })
}

/// `P_{N′}`: `z ↦ P_N z`, `u ↦ u − E[u]`.
pub fn project_nprime(lp: &LiftedProgram, z: &PolicyVector, u: &PolicyVector) -> (PolicyVector, PolicyVector) {
    let mean = mean_u(lp, u);
    let mut centered = u.clone();
    for i in 0..u.n_scenarios() {
        for (x, m) in centered.scenario_mut(i).iter_mut().zip(&mean) {
            *x -= m;
        }
    }
    (lp.base.project_n(z), centered)
}

/// `E[u]`.
pub fn mean_u(lp: &LiftedProgram, u: &PolicyVector) -> Vec<f64> {
    let mut mean = vec![0.0; lp.k()];
    for (i, p) in lp.base.space.probabilities().iter().enumerate() {
        for (m, x) in mean.iter_mut().zip(u.scenario(i)) {
            *m += p * x;
        }
    }
    mean
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedRecord {
    /// Residuals over the lifted pair; `objective` is `E[g]` at `z⁺`.
    pub pha: IterationRecord,
    /// Largest positive part of `E[h̄(z⁺)]`.
    pub constraint_violation: f64,
    /// Euclidean norm of the constant multiplier `w`.
    pub w_norm: f64,
}

/// Iterate of the lifted algorithm. `w` is stored once since it is the same
/// in every scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedState {
    pub z: PolicyVector,
    pub u: PolicyVector,
    pub v: PolicyVector,
    pub w: Vec<f64>,
    pub z_hat: Option<PolicyVector>,
    pub u_hat: Option<PolicyVector>,
    pub iter: usize,
    pub r: f64,
    pub log: Vec<LiftedRecord>,
    hints: Vec<ActiveSet>,
}

impl LiftedState {
    /// `(z, v)` projected onto `N × M`; `u = 0`, `w = 0`.
    pub fn new(lp: &LiftedProgram, z: PolicyVector, v: PolicyVector, r: f64) -> Result<Self> {
        let shape = lp.base.zeros();
        if !z.same_shape(&shape) || !v.same_shape(&shape) {
            return Err(Error::Dimension("initial pair does not match the program layout".into()));
        }
        Ok(Self {
            z: lp.base.project_n(&z),
            u: lp.zero_u(),
            v: lp.base.project_m(&v),
            w: vec![0.0; lp.k()],
            z_hat: None,
            u_hat: None,
            iter: 0,
            r,
            log: Vec::new(),
            hints: vec![ActiveSet::default(); lp.base.n_scenarios()],
        })
    }

    /// `w` expanded to one copy per scenario.
    pub fn w_policy(&self) -> PolicyVector {
        let rows = vec![self.w.clone(); self.u.n_scenarios()];
        PolicyVector::from_rows(&rows, &[self.w.len()]).expect("rows share one width")
    }
}

/// Same start as the unlifted algorithm for `(z, v)`, with `u⁰ = 0`, `w⁰ = 0`.
pub fn exfunl_init<E: ScenarioMap>(lp: &LiftedProgram, cfg: &PhaConfig, exec: &E) -> Result<LiftedState> {
    let base = pha_init(&lp.base, cfg, exec)?;
    LiftedState::new(lp, base.z, base.v, cfg.r)
}

/// One iteration of the lifted algorithm; consumes the state like
/// [`crate::pha::pha_iterate`].
pub fn exfunl_iterate(lp: &LiftedProgram, state: LiftedState, cfg: &PhaConfig) -> Result<LiftedState> {
    exfunl_iterate_with(lp, state, cfg, &Sequential)
}

pub fn exfunl_iterate_with<E: ScenarioMap>(
    lp: &LiftedProgram,
    state: LiftedState,
    cfg: &PhaConfig,
    exec: &E,
) -> Result<LiftedState> {
    let r = state.r;
    let n = lp.z_width();
    let k = lp.k();
    let sols = exec.map(lp.base.n_scenarios(), |i| {
        let mut center = state.z.scenario(i).to_vec();
        center.extend_from_slice(state.u.scenario(i));
        let mut shift = state.v.scenario(i).to_vec();
        shift.extend_from_slice(&state.w);
        let inst = proximal_instance(&lp.program.templates[i], &center, &shift, r);
        solve_scenario(&inst, lp.base.space.scenario(i).id, &state.hints[i], cfg.qp_tol, cfg.qp_max_iter)
    });
    let mut z_hat = lp.base.zeros();
    let mut u_hat = lp.zero_u();
    let mut hints = Vec::with_capacity(sols.len());
    for (i, s) in sols.into_iter().enumerate() {
        let s = s?;
        z_hat.scenario_mut(i).copy_from_slice(&s.z[..n]);
        u_hat.scenario_mut(i).copy_from_slice(&s.z[n..n + k]);
        hints.push(s.active);
    }

    let (z, u) = project_nprime(lp, &z_hat, &u_hat);
    let v = state.v.add_scaled(r, &lp.base.project_m(&z_hat));
    let mean = mean_u(lp, &u_hat);
    let w: Vec<f64> = state.w.iter().zip(&mean).map(|(w, m)| w + r * m).collect();

    // ‖P_{M′} η̂‖² = ‖P_M ẑ‖² + |E û|², and ‖η⁺ − η‖² likewise splits by block.
    let mean_sq: f64 = mean.iter().map(|m| m * m).sum();
    let pm = lp.base.norm(&lp.base.project_m(&z_hat));
    let primal = libm::sqrt(pm * pm + mean_sq);
    let du = u.sub(&state.u);
    let du_sq: f64 = lp.base.space.probabilities().iter().enumerate().map(|(i, p)| p * dot(du.scenario(i), du.scenario(i))).sum();
    let dz = lp.base.norm(&z.sub(&state.z));
    let dual = libm::sqrt(dz * dz + du_sq);

    let mut log = state.log;
    log.push(LiftedRecord {
        pha: IterationRecord {
            iter: state.iter + 1,
            primal_residual: primal,
            dual_residual: dual,
            combined: libm::hypot(primal, dual),
            objective: lp.base.objective(&z),
            r,
        },
        constraint_violation: lp.cons.max_violation(lp.base.space.probabilities(), &z),
        w_norm: norm2(&w),
    });
    let next_r = adapt_r(cfg, r, primal, dual);
    Ok(LiftedState {
        z,
        u,
        v,
        w,
        z_hat: Some(z_hat),
        u_hat: Some(u_hat),
        iter: state.iter + 1,
        r: next_r,
        log,
        hints,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExFunlOutcome {
    pub z: PolicyVector,
    pub u: PolicyVector,
    pub v: PolicyVector,
    pub w: Vec<f64>,
    pub log: Vec<LiftedRecord>,
    pub converged: bool,
    pub objective: f64,
    /// Largest positive part of `E[h̄(z)]` at the returned `z`.
    pub constraint_violation: f64,
}

pub fn exfunl_solve(prog: &ScenarioProgram, cons: &ExFunlConstraint, cfg: &PhaConfig) -> Result<ExFunlOutcome> {
    exfunl_solve_with(prog, cons, cfg, &Sequential, |_| {})
}

pub fn exfunl_solve_with<E, O>(
    prog: &ScenarioProgram,
    cons: &ExFunlConstraint,
    cfg: &PhaConfig,
    exec: &E,
    mut observer: O,
) -> Result<ExFunlOutcome>
where
    E: ScenarioMap,
    O: FnMut(&LiftedRecord),
{
    cfg.validate()?;
    let lp = lift_instance(prog, cons)?;
    let mut state = exfunl_init(&lp, cfg, exec)?;
    let mut converged = false;
    while state.iter < cfg.max_iter {
        state = exfunl_iterate_with(&lp, state, cfg, exec)?;
        let rec = *state.log.last().expect("one record per iteration");
        observer(&rec);
        if rec.pha.combined <= cfg.tol {
            converged = true;
            break;
        }
    }
    let objective = prog.objective(&state.z);
    let constraint_violation = cons.max_violation(prog.space.probabilities(), &state.z);
    Ok(ExFunlOutcome {
        z: state.z,
        u: state.u,
        v: state.v,
        w: state.w,
        log: state.log,
        converged,
        objective,
        constraint_violation,
    })
}
