//! Dense convex quadratic programming.
//!
//! Solves
//!
//! ```text
//!     minimize     ½ zᵀ Q z + qᵀ z
//!     subject to   Aeq z  = beq
//!                  Ain z <= bin
//!                  lb <= z <= ub
//! ```
//!
//! Strictly convex instances go straight to a Goldfarb–Idnani dual active-set
//! method: it starts at the unconstrained minimizer and adds violated
//! constraints one at a time, keeping dual feasibility throughout, so the
//! returned point is exact up to rounding. Linear programs (zero Hessian) go
//! to a dense bounded-variable simplex. Other positive semidefinite instances
//! are handled by an outer proximal point loop
//! `z⁺ = argmin f(z) + ρ/2 ‖z − z_k‖²`, which terminates finitely on polyhedral
//! problems.
//!
//! Warm starts are supported through [`ActiveSet`] hints: hinted constraints are
//! preferred when choosing which violated constraint enters next.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{self, dot, norm_inf, Matrix};
use crate::simplex;
use crate::{Error, Result};

/// Convex QP data. Bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct QPInstance {
    pub hessian: Matrix,
    pub linear: Vec<f64>,
    pub a_eq: Matrix,
    pub b_eq: Vec<f64>,
    pub a_in: Matrix,
    pub b_in: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

impl QPInstance {
    /// Unconstrained instance with zero objective in `n` variables.
    pub fn new(n: usize) -> Self {
        Self {
            hessian: Matrix::zeros(n, n),
            linear: vec![0.0; n],
            a_eq: Matrix::zeros(0, n),
            b_eq: Vec::new(),
            a_in: Matrix::zeros(0, n),
            b_in: Vec::new(),
            lb: vec![f64::NEG_INFINITY; n],
            ub: vec![f64::INFINITY; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn with_objective(mut self, hessian: Matrix, linear: Vec<f64>) -> Self {
        self.hessian = hessian;
        self.linear = linear;
        self
    }

    pub fn with_eq(mut self, a: Matrix, b: Vec<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_ineq(mut self, a: Matrix, b: Vec<f64>) -> Self {
        self.a_in = a;
        self.b_in = b;
        self
    }

    pub fn with_bounds(mut self, lb: Vec<f64>, ub: Vec<f64>) -> Self {
        self.lb = lb;
        self.ub = ub;
        self
    }

    pub fn push_eq(&mut self, row: &[f64], rhs: f64) {
        self.a_eq.push_row(row);
        self.b_eq.push(rhs);
    }

    pub fn push_ineq(&mut self, row: &[f64], rhs: f64) {
        self.a_in.push_row(row);
        self.b_in.push(rhs);
    }

    /// Checks that all blocks conform and the Hessian is symmetric.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        let dims_ok = self.hessian.rows() == n
            && self.hessian.cols() == n
            && self.a_eq.cols() == n
            && self.a_eq.rows() == self.b_eq.len()
            && self.a_in.cols() == n
            && self.a_in.rows() == self.b_in.len()
            && self.lb.len() == n
            && self.ub.len() == n;
        if !dims_ok {
            return Err(Error::Dimension(format!(
                "QP blocks do not conform to {n} variables (Q {}x{}, Aeq {}x{}/{}, Ain {}x{}/{}, bounds {}/{})",
                self.hessian.rows(),
                self.hessian.cols(),
                self.a_eq.rows(),
                self.a_eq.cols(),
                self.b_eq.len(),
                self.a_in.rows(),
                self.a_in.cols(),
                self.b_in.len(),
                self.lb.len(),
                self.ub.len()
            )));
        }
        let asym = self.hessian.asymmetry();
        if asym > 1e-12 * (1.0 + self.hessian.max_abs()) {
            return Err(Error::Dimension(format!("Hessian is not symmetric (asymmetry {asym:e})")));
        }
        Ok(())
    }

    /// Objective value `½ zᵀQz + qᵀz`.
    pub fn objective(&self, z: &[f64]) -> f64 {
        0.5 * self.hessian.quad_form(z) + dot(&self.linear, z)
    }

    /// Largest violation of any constraint or bound at `z` (zero when feasible).
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (row, b) in (0..self.a_eq.rows()).map(|i| self.a_eq.row(i)).zip(&self.b_eq) {
            worst = worst.max((dot(row, z) - b).abs());
        }
        for (row, b) in (0..self.a_in.rows()).map(|i| self.a_in.row(i)).zip(&self.b_in) {
            worst = worst.max(dot(row, z) - b);
        }
        for j in 0..z.len() {
            worst = worst.max(self.lb[j] - z[j]).max(z[j] - self.ub[j]);
        }
        worst
    }
}

/// Lagrange multipliers, signed so that
/// `Qz + q + Aeqᵀ eq + Ainᵀ ineq − lower + upper = 0` with `ineq, lower, upper ≥ 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Duals {
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Duals {
    fn zeros(inst: &QPInstance) -> Self {
        let n = inst.dim();
        Self {
            eq: vec![0.0; inst.b_eq.len()],
            ineq: vec![0.0; inst.b_in.len()],
            lower: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QpStatus {
    Optimal,
    /// The constraints admit no point; `certificate` names the constraint that
    /// could not be satisfied and why.
    Infeasible { certificate: String },
    /// Iteration cap reached; the solution carries the best iterate.
    MaxIter,
    /// The objective decreases without bound along a feasible ray (only
    /// detected for linear programs).
    Unbounded,
}

/// Reference to one constraint of a [`QPInstance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConstraintRef {
    Eq(usize),
    Ineq(usize),
    Lower(usize),
    Upper(usize),
}

/// Constraints found active at a solution; feed back as a warm-start hint.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActiveSet(pub Vec<ConstraintRef>);

#[derive(Debug, Clone, PartialEq)]
pub struct QPSolution {
    pub z: Vec<f64>,
    pub duals: Duals,
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub active: ActiveSet,
    /// Active-set changes summed over all inner solves.
    pub iterations: usize,
}

impl QPSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

/// Default subproblem tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Solves `inst` from a cold start.
pub fn solve_qp(inst: &QPInstance, tol: f64, max_iter: usize) -> Result<QPSolution> {
    solve_qp_warm(inst, tol, max_iter, &ActiveSet::default())
}

/// Solves `inst`, preferring the constraints in `hint` when several are violated.
///
/// `max_iter` caps the active-set changes of each inner solve and the number
/// of proximal outer iterations for singular Hessians; for linear programs it
/// caps simplex pivots, and the hint is not used.
pub fn solve_qp_warm(inst: &QPInstance, tol: f64, max_iter: usize, hint: &ActiveSet) -> Result<QPSolution> {
    inst.validate()?;
    let n = inst.dim();
    let cons = Constraints::from_instance(inst)?;
    let hinted = cons.hint_mask(hint);

    if inst.hessian.max_abs() == 0.0 && inst.lb.iter().zip(&inst.ub).all(|(l, u)| l <= u) {
        let mut sol = simplex::solve_lp(inst, max_iter);
        if sol.is_optimal() {
            sol.kkt_residual = kkt_residual(inst, &sol);
            if sol.kkt_residual > tol {
                sol.status = QpStatus::MaxIter;
            }
        }
        return Ok(sol);
    }

    if let Some(chol) = linalg::cholesky(&inst.hessian, 1e-12) {
        let out = dual_active_set(&chol, &inst.linear, &cons, &hinted, max_iter);
        return Ok(finish(inst, &cons, out, tol));
    }

    // Singular Hessian: proximal point outer loop.
    let rho = prox_weight(inst);
    let mut g = inst.hessian.clone();
    for i in 0..n {
        g[(i, i)] += rho;
    }
    let chol = linalg::cholesky(&g, 1e-14)
        .ok_or_else(|| Error::Dimension(String::from("Hessian is not positive semidefinite")))?;
    let mut center: Vec<f64> = (0..n).map(|j| 0.0f64.max(inst.lb[j]).min(inst.ub[j])).collect();
    let mut mask = hinted;
    let mut iterations = 0;
    let mut best: Option<QPSolution> = None;
    for _ in 0..max_iter.max(1) {
        let c: Vec<f64> = inst.linear.iter().zip(&center).map(|(qi, zi)| qi - rho * zi).collect();
        let out = dual_active_set(&chol, &c, &cons, &mask, max_iter);
        iterations += out.iterations;
        if let GiStatus::Infeasible(_) = out.status {
            let mut sol = finish(inst, &cons, out, tol);
            sol.iterations = iterations;
            return Ok(sol);
        }
        let inner_done = matches!(out.status, GiStatus::Optimal);
        mask = vec![false; cons.len()];
        for &k in &out.active {
            mask[k] = true;
        }
        center.clone_from(&out.x);
        let mut sol = finish(inst, &cons, out, tol);
        sol.iterations = iterations;
        if sol.is_optimal() {
            return Ok(sol);
        }
        if !inner_done {
            sol.status = QpStatus::MaxIter;
            return Ok(sol);
        }
        sol.status = QpStatus::MaxIter;
        best = Some(sol);
    }
    Ok(best.expect("at least one outer iteration"))
}

/// Proximal weight for singular Hessians, relative to the objective scale.
fn prox_weight(inst: &QPInstance) -> f64 {
    1e-3 * (1.0f64).max(norm_inf(&inst.linear)).max(inst.hessian.max_abs())
}

/// Infinity norm of the stacked KKT residuals of `sol` for `inst`:
/// stationarity, primal feasibility, dual sign feasibility and complementarity.
pub fn kkt_residual(inst: &QPInstance, sol: &QPSolution) -> f64 {
    kkt_residual_of(inst, &sol.z, &sol.duals)
}

pub fn kkt_residual_of(inst: &QPInstance, z: &[f64], duals: &Duals) -> f64 {
    let n = inst.dim();
    let mut grad = inst.hessian.mul_vec(z);
    for j in 0..n {
        grad[j] += inst.linear[j] - duals.lower[j] + duals.upper[j];
    }
    let eq_part = inst.a_eq.tr_mul_vec(&duals.eq);
    let in_part = inst.a_in.tr_mul_vec(&duals.ineq);
    let mut worst = 0.0f64;
    for j in 0..n {
        worst = worst.max((grad[j] + eq_part[j] + in_part[j]).abs());
    }
    for i in 0..inst.b_eq.len() {
        worst = worst.max((dot(inst.a_eq.row(i), z) - inst.b_eq[i]).abs());
    }
    for i in 0..inst.b_in.len() {
        let slack = inst.b_in[i] - dot(inst.a_in.row(i), z);
        let mu = duals.ineq[i];
        worst = worst.max(-slack).max(-mu).max((mu * slack).abs());
    }
    for j in 0..n {
        worst = worst.max(bound_terms(z[j] - inst.lb[j], duals.lower[j]));
        worst = worst.max(bound_terms(inst.ub[j] - z[j], duals.upper[j]));
    }
    worst
}

fn bound_terms(slack: f64, mult: f64) -> f64 {
    if slack.is_infinite() {
        // No constraint: a nonzero multiplier is pure error.
        return mult.abs();
    }
    (-slack).max(-mult).max((mult * slack).abs())
}

// ---------------------------------------------------------------------------
// Constraint bookkeeping
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
enum Normal {
    Row(usize),
    Unit(usize, f64),
}

/// One constraint in the solver's canonical form `nᵀz >= b` (or `= b`).
#[derive(Debug, Clone, Copy)]
struct Con {
    normal: Normal,
    sign: f64,
    rhs: f64,
    equality: bool,
    origin: ConstraintRef,
}

struct Constraints {
    rows: Matrix,
    row_norms: Vec<f64>,
    list: Vec<Con>,
}

impl Constraints {
    fn from_instance(inst: &QPInstance) -> Result<Self> {
        let n = inst.dim();
        let mut rows = Matrix::zeros(0, n);
        let mut list = Vec::new();
        for i in 0..inst.b_eq.len() {
            rows.push_row(inst.a_eq.row(i));
            list.push(Con {
                normal: Normal::Row(rows.rows() - 1),
                sign: 1.0,
                rhs: inst.b_eq[i],
                equality: true,
                origin: ConstraintRef::Eq(i),
            });
        }
        for j in 0..n {
            let (lo, hi) = (inst.lb[j], inst.ub[j]);
            if lo > hi {
                return Ok(Self::infeasible_bounds(inst, rows, j));
            }
            if lo == hi {
                list.push(Con {
                    normal: Normal::Unit(j, 1.0),
                    sign: 1.0,
                    rhs: lo,
                    equality: true,
                    origin: ConstraintRef::Lower(j),
                });
            }
        }
        for i in 0..inst.b_in.len() {
            rows.push_row(inst.a_in.row(i));
            list.push(Con {
                normal: Normal::Row(rows.rows() - 1),
                sign: -1.0,
                rhs: -inst.b_in[i],
                equality: false,
                origin: ConstraintRef::Ineq(i),
            });
        }
        for j in 0..n {
            let (lo, hi) = (inst.lb[j], inst.ub[j]);
            if lo == hi {
                continue;
            }
            if lo.is_finite() {
                list.push(Con { normal: Normal::Unit(j, 1.0), sign: 1.0, rhs: lo, equality: false, origin: ConstraintRef::Lower(j) });
            }
            if hi.is_finite() {
                list.push(Con { normal: Normal::Unit(j, -1.0), sign: 1.0, rhs: -hi, equality: false, origin: ConstraintRef::Upper(j) });
            }
        }
        let row_norms = (0..rows.rows()).map(|i| linalg::norm2(rows.row(i))).collect();
        Ok(Self { rows, row_norms, list })
    }

    /// A crossed bound pair is reported through an unsatisfiable `0 >= 1` row.
    fn infeasible_bounds(inst: &QPInstance, mut rows: Matrix, j: usize) -> Self {
        let n = inst.dim();
        rows.push_row(&vec![0.0; n]);
        let list = vec![Con {
            normal: Normal::Row(rows.rows() - 1),
            sign: 1.0,
            rhs: 1.0,
            equality: true,
            origin: ConstraintRef::Lower(j),
        }];
        Self { row_norms: vec![0.0; rows.rows()], rows, list }
    }

    fn len(&self) -> usize {
        self.list.len()
    }

    fn hint_mask(&self, hint: &ActiveSet) -> Vec<bool> {
        let mut mask = vec![false; self.list.len()];
        if hint.0.is_empty() {
            return mask;
        }
        let mut wanted = hint.0.clone();
        wanted.sort_unstable();
        for (k, c) in self.list.iter().enumerate() {
            mask[k] = wanted.binary_search(&c.origin).is_ok();
        }
        mask
    }

    /// `nᵀz` for constraint `k` (canonical sign applied).
    fn value(&self, k: usize, z: &[f64]) -> f64 {
        let c = &self.list[k];
        match c.normal {
            Normal::Row(r) => c.sign * dot(self.rows.row(r), z),
            Normal::Unit(j, s) => s * z[j],
        }
    }

    fn norm(&self, k: usize) -> f64 {
        match self.list[k].normal {
            Normal::Row(r) => self.row_norms[r],
            Normal::Unit(..) => 1.0,
        }
    }

    /// `d = Jᵀ n_k`.
    fn project(&self, k: usize, j_mat: &Matrix, out: &mut [f64]) {
        let c = &self.list[k];
        match c.normal {
            Normal::Row(r) => {
                out.iter_mut().for_each(|v| *v = 0.0);
                let row = self.rows.row(r);
                for (i, a) in row.iter().enumerate() {
                    if *a != 0.0 {
                        linalg::axpy(c.sign * a, j_mat.row(i), out);
                    }
                }
            }
            Normal::Unit(i, s) => {
                for (o, v) in out.iter_mut().zip(j_mat.row(i)) {
                    *o = s * v;
                }
            }
        }
    }

    /// Violation tolerance for constraint `k` at `z`.
    fn feas_tol(&self, k: usize, z: &[f64]) -> f64 {
        let c = &self.list[k];
        // Round-off in `nᵀz` is bounded by the sum of |n_i z_i|.
        let mass = match c.normal {
            Normal::Row(r) => self.rows.row(r).iter().zip(z).map(|(a, v)| (a * v).abs()).sum(),
            Normal::Unit(j, _) => z[j].abs(),
        };
        1e-13 * (1.0 + c.rhs.abs() + mass)
    }
}

// ---------------------------------------------------------------------------
// Goldfarb–Idnani dual active-set method
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum GiStatus {
    Optimal,
    Infeasible(String),
    MaxIter,
}

#[derive(Debug)]
struct GiOutput {
    x: Vec<f64>,
    /// Constraint indices (into `Constraints::list`) of the active set.
    active: Vec<usize>,
    /// Multipliers aligned with `active`, in canonical (`>=`) form.
    mult: Vec<f64>,
    status: GiStatus,
    iterations: usize,
}

struct Factor {
    n: usize,
    /// `J = L⁻ᵀ Q`, stored row-major (`j[(row, col)]`).
    j: Matrix,
    /// Upper-triangular `R`; only the leading `q × q` block is meaningful.
    r: Matrix,
    q: usize,
    r_norm: f64,
}

impl Factor {
    fn new(chol: &Matrix) -> Self {
        let n = chol.rows();
        let mut j = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for col in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[col] = 1.0;
            let c = linalg::solve_lower_tr(chol, &e);
            for row in 0..n {
                j[(row, col)] = c[row];
            }
        }
        Self { n, j, r: Matrix::zeros(n, n), q: 0, r_norm: 1.0 }
    }

    /// Primal step `z = J₂ d₂`.
    fn primal_dir(&self, d: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        for row in 0..self.n {
            let jr = self.j.row(row);
            let mut s = 0.0;
            for col in self.q..self.n {
                s += jr[col] * d[col];
            }
            z[row] = s;
        }
    }

    /// Dual step `r = R⁻¹ d₁`.
    fn dual_dir(&self, d: &[f64], r: &mut Vec<f64>) {
        r.clear();
        r.resize(self.q, 0.0);
        for i in (0..self.q).rev() {
            let mut s = d[i];
            for k in i + 1..self.q {
                s -= self.r[(i, k)] * r[k];
            }
            r[i] = s / self.r[(i, i)];
        }
    }

    /// Appends a constraint with projected normal `d` (modified in place).
    /// Returns false if the normal is dependent on the active ones.
    fn add(&mut self, d: &mut [f64]) -> bool {
        let n = self.n;
        let q = self.q;
        for jcol in (q + 1..n).rev() {
            let mut cc = d[jcol - 1];
            let mut ss = d[jcol];
            let h = libm::hypot(cc, ss);
            if h == 0.0 {
                continue;
            }
            d[jcol] = 0.0;
            ss /= h;
            cc /= h;
            if cc < 0.0 {
                cc = -cc;
                ss = -ss;
                d[jcol - 1] = -h;
            } else {
                d[jcol - 1] = h;
            }
            let xny = ss / (1.0 + cc);
            for row in 0..n {
                let t1 = self.j[(row, jcol - 1)];
                let t2 = self.j[(row, jcol)];
                let a = t1 * cc + t2 * ss;
                self.j[(row, jcol - 1)] = a;
                self.j[(row, jcol)] = xny * (t1 + a) - t2;
            }
        }
        for i in 0..=q {
            self.r[(i, q)] = d[i];
        }
        self.q += 1;
        let diag = d[q].abs();
        if diag <= f64::EPSILON * self.r_norm {
            return false;
        }
        self.r_norm = self.r_norm.max(diag);
        true
    }

    /// Removes the active constraint at position `l`.
    fn drop(&mut self, l: usize) {
        let n = self.n;
        for col in l..self.q - 1 {
            for i in 0..n {
                self.r[(i, col)] = self.r[(i, col + 1)];
            }
        }
        for i in 0..n {
            self.r[(i, self.q - 1)] = 0.0;
        }
        self.q -= 1;
        let q = self.q;
        for jj in l..q {
            let mut cc = self.r[(jj, jj)];
            let mut ss = self.r[(jj + 1, jj)];
            let h = libm::hypot(cc, ss);
            if h == 0.0 {
                continue;
            }
            cc /= h;
            ss /= h;
            self.r[(jj + 1, jj)] = 0.0;
            if cc < 0.0 {
                self.r[(jj, jj)] = -h;
                cc = -cc;
                ss = -ss;
            } else {
                self.r[(jj, jj)] = h;
            }
            let xny = ss / (1.0 + cc);
            for k in jj + 1..q {
                let t1 = self.r[(jj, k)];
                let t2 = self.r[(jj + 1, k)];
                let a = t1 * cc + t2 * ss;
                self.r[(jj, k)] = a;
                self.r[(jj + 1, k)] = xny * (t1 + a) - t2;
            }
            for row in 0..n {
                let t1 = self.j[(row, jj)];
                let t2 = self.j[(row, jj + 1)];
                let a = t1 * cc + t2 * ss;
                self.j[(row, jj)] = a;
                self.j[(row, jj + 1)] = xny * (a + t1) - t2;
            }
        }
    }
}

/// Goldfarb–Idnani on `min ½xᵀGx + cᵀx` with `G = L Lᵀ` given by `chol`.
fn dual_active_set(chol: &Matrix, c: &[f64], cons: &Constraints, hinted: &[bool], max_iter: usize) -> GiOutput {
    let mut flip = vec![1.0; cons.len()];
    let mut out = dual_active_set_inner(chol, c, cons, hinted, max_iter, &mut flip);
    // Express equality multipliers w.r.t. the unflipped normal.
    for (pos, &k) in out.active.iter().enumerate() {
        out.mult[pos] *= flip[k];
    }
    out
}

fn dual_active_set_inner(
    chol: &Matrix,
    c: &[f64],
    cons: &Constraints,
    hinted: &[bool],
    max_iter: usize,
    flip: &mut [f64],
) -> GiOutput {
    let n = chol.rows();
    let mut f = Factor::new(chol);
    let y = linalg::solve_lower(chol, c);
    let mut x: Vec<f64> = linalg::solve_lower_tr(chol, &y).into_iter().map(|v| -v).collect();

    let mut active: Vec<usize> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let mut is_active = vec![false; cons.len()];
    let mut d = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut r = Vec::new();
    let mut iterations = 0usize;

    let out = |x: Vec<f64>, active: Vec<usize>, mult: Vec<f64>, status, iterations| GiOutput { x, active, mult, status, iterations };

    // Equalities first, in order; then the most violated inequality each round.
    let eqs: Vec<usize> = (0..cons.len()).filter(|&k| cons.list[k].equality).collect();
    let mut eq_cursor = 0;
    loop {
        let p = if eq_cursor < eqs.len() {
            let k = eqs[eq_cursor];
            eq_cursor += 1;
            let s = cons.value(k, &x) - cons.list[k].rhs;
            if s > 0.0 {
                flip[k] = -1.0;
            }
            k
        } else {
            match most_violated(cons, &x, &is_active, hinted) {
                Some(k) => k,
                None => return out(x, active, mult, GiStatus::Optimal, iterations),
            }
        };
        let sgn = flip[p];
        let mut s_p = sgn * (cons.value(p, &x) - cons.list[p].rhs);
        let mut u_new = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return out(x, active, mult, GiStatus::MaxIter, iterations);
            }
            cons.project(p, &f.j, &mut d);
            if sgn < 0.0 {
                d.iter_mut().for_each(|v| *v = -*v);
            }
            f.primal_dir(&d, &mut z);
            f.dual_dir(&d, &mut r);
            let d2: f64 = d[f.q..].iter().map(|v| v * v).sum();
            let dn: f64 = d.iter().map(|v| v * v).sum();
            let z_zero = d2 <= 1e-24 * dn || dn == 0.0;

            // Partial (dual) step limit over active inequalities.
            let mut t1 = f64::INFINITY;
            let mut drop_at = usize::MAX;
            for (pos, &k) in active.iter().enumerate() {
                if cons.list[k].equality {
                    continue;
                }
                if r[pos] > 0.0 {
                    let t = mult[pos] / r[pos];
                    if t < t1 {
                        t1 = t;
                        drop_at = pos;
                    }
                }
            }
            let t2 = if z_zero { f64::INFINITY } else { -s_p / d2 };

            if z_zero {
                if cons.list[p].equality && s_p.abs() <= cons.feas_tol(p, &x) * 1e3 {
                    // Redundant equality.
                    break;
                }
                if t1.is_infinite() {
                    let cert = format!(
                        "{:?} is violated by {:e} and its normal lies in the span of active constraints with no dual step limit",
                        cons.list[p].origin, -s_p
                    );
                    return out(x, active, mult, GiStatus::Infeasible(cert), iterations);
                }
                for (m, rv) in mult.iter_mut().zip(&r) {
                    *m -= t1 * rv;
                }
                u_new += t1;
                remove_active(&mut f, &mut active, &mut mult, &mut is_active, drop_at);
                continue;
            }

            let t = t1.min(t2);
            for (xi, zi) in x.iter_mut().zip(&z) {
                *xi += t * zi;
            }
            for (m, rv) in mult.iter_mut().zip(&r) {
                *m -= t * rv;
            }
            u_new += t;

            if t2 <= t1 {
                let mut dd = d.clone();
                if !f.add(&mut dd) {
                    // Numerically dependent: undo the bookkeeping for this column.
                    f.q -= 1;
                    let cert = format!("{:?}: entering normal numerically dependent on the active set", cons.list[p].origin);
                    return out(x, active, mult, GiStatus::Infeasible(cert), iterations);
                }
                active.push(p);
                mult.push(u_new);
                is_active[p] = true;
                break;
            }
            remove_active(&mut f, &mut active, &mut mult, &mut is_active, drop_at);
            s_p = sgn * (cons.value(p, &x) - cons.list[p].rhs);
        }

        if eq_cursor >= eqs.len() && active.len() > n {
            // Cannot happen in exact arithmetic; guards a corrupted factor.
            return out(x, active, mult, GiStatus::MaxIter, iterations);
        }
    }
}

fn remove_active(f: &mut Factor, active: &mut Vec<usize>, mult: &mut Vec<f64>, is_active: &mut [bool], pos: usize) {
    is_active[active[pos]] = false;
    active.remove(pos);
    mult.remove(pos);
    f.drop(pos);
}

fn most_violated(cons: &Constraints, x: &[f64], is_active: &[bool], hinted: &[bool]) -> Option<usize> {
    let mut best: Option<(bool, f64, usize)> = None;
    for k in 0..cons.len() {
        let c = &cons.list[k];
        if c.equality || is_active[k] {
            continue;
        }
        let s = cons.value(k, x) - c.rhs;
        if s >= -cons.feas_tol(k, x) {
            continue;
        }
        let score = -s / cons.norm(k).max(f64::MIN_POSITIVE);
        let key = (hinted[k], score, k);
        let better = match best {
            None => true,
            Some((bh, bs, _)) => (key.0 && !bh) || (key.0 == bh && score > bs),
        };
        if better {
            best = Some(key);
        }
    }
    best.map(|(_, _, k)| k)
}

/// Converts solver output into a [`QPSolution`]. For proximal subproblems the
/// KKT residual is still measured against the original instance, so it carries
/// the stationarity gap `ρ (z⁺ − z_k)`.
fn finish(inst: &QPInstance, cons: &Constraints, out: GiOutput, tol: f64) -> QPSolution {
    let mut duals = Duals::zeros(inst);
    let mut active = Vec::with_capacity(out.active.len());
    for (&k, &u) in out.active.iter().zip(&out.mult) {
        let c = &cons.list[k];
        active.push(c.origin);
        match (c.origin, c.normal) {
            (ConstraintRef::Eq(i), _) => duals.eq[i] = -u,
            (ConstraintRef::Ineq(i), _) => duals.ineq[i] = u,
            (ConstraintRef::Lower(j), Normal::Unit(..)) if c.equality => {
                // Fixed variable: split the free-sign multiplier.
                if u >= 0.0 {
                    duals.lower[j] = u;
                } else {
                    duals.upper[j] = -u;
                }
            }
            (ConstraintRef::Lower(j), _) => duals.lower[j] = u,
            (ConstraintRef::Upper(j), _) => duals.upper[j] = u,
        }
    }
    let status = match out.status {
        GiStatus::Optimal => QpStatus::Optimal,
        GiStatus::Infeasible(certificate) => QpStatus::Infeasible { certificate },
        GiStatus::MaxIter => QpStatus::MaxIter,
    };
    let mut sol = QPSolution { z: out.x, duals, status, kkt_residual: f64::INFINITY, active: ActiveSet(active), iterations: out.iterations };
    if matches!(sol.status, QpStatus::Infeasible { .. }) {
        return sol;
    }
    sol.kkt_residual = kkt_residual(inst, &sol);
    if sol.status == QpStatus::Optimal && sol.kkt_residual > tol {
        sol.status = QpStatus::MaxIter;
    }
    sol
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(q: f64, c: f64) -> QPInstance {
        QPInstance::new(1).with_objective(Matrix::from_rows(&[vec![q]]), vec![c])
    }

    #[test]
    fn proximal_identity() {
        // min ‖z − a‖² = zᵀz − 2aᵀz + const
        let a = [1.5, -2.0, 0.25];
        let inst = QPInstance::new(3).with_objective(Matrix::identity(3).scaled(2.0), a.iter().map(|v| -2.0 * v).collect());
        let sol = solve_qp(&inst, DEFAULT_TOL, 100).unwrap();
        assert!(sol.is_optimal());
        for i in 0..3 {
            assert!((sol.z[i] - a[i]).abs() < 1e-14);
        }
        assert!(sol.kkt_residual <= 1e-10);
    }

    #[test]
    fn active_lower_bound() {
        let inst = scalar(1.0, 0.0).with_bounds(vec![1.0], vec![f64::INFINITY]);
        let sol = solve_qp(&inst, DEFAULT_TOL, 100).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.z[0] - 1.0).abs() < 1e-14);
        assert!((sol.duals.lower[0] - 1.0).abs() < 1e-14);
        assert!(kkt_residual(&inst, &sol) <= 1e-10);
    }

    #[test]
    fn same_bound_as_general_inequality() {
        // z >= 1 written as -z <= -1
        let mut inst = scalar(1.0, 0.0);
        inst.push_ineq(&[-1.0], -1.0);
        let sol = solve_qp(&inst, DEFAULT_TOL, 100).unwrap();
        assert!((sol.z[0] - 1.0).abs() < 1e-14);
        assert!((sol.duals.ineq[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn equality_and_inequality() {
        // min x² + y² s.t. x + y = 2, x <= 0.5 → x = 0.5, y = 1.5
        let mut inst = QPInstance::new(2).with_objective(Matrix::identity(2).scaled(2.0), vec![0.0, 0.0]);
        inst.push_eq(&[1.0, 1.0], 2.0);
        inst.push_ineq(&[1.0, 0.0], 0.5);
        let sol = solve_qp(&inst, DEFAULT_TOL, 100).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.z[0] - 0.5).abs() < 1e-13 && (sol.z[1] - 1.5).abs() < 1e-13);
        assert!(sol.kkt_residual <= 1e-10);
        // stationarity: 2y + λ = 0 → λ = −3; 2x + λ + μ = 0 → μ = 2
        assert!((sol.duals.eq[0] + 3.0).abs() < 1e-12);
        assert!((sol.duals.ineq[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn equality_with_positive_initial_residual() {
        let mut inst = scalar(2.0, 0.0);
        inst.push_eq(&[1.0], -3.0);
        let sol = solve_qp(&inst, DEFAULT_TOL, 100).unwrap();
        assert!((sol.z[0] + 3.0).abs() < 1e-14);
        assert!(sol.kkt_residual <= 1e-12);
    }

    #[test]
    fn detects_infeasible_system() {
        let mut inst = scalar(1.0, 0.0);
        inst.push_ineq(&[1.0], 0.0); // z <= 0
        inst.push_ineq(&[-1.0], -1.0); // z >= 1
        let sol = solve_qp(&inst, DEFAULT_TOL, 100).unwrap();
        assert!(matches!(sol.status, QpStatus::Infeasible { .. }));

        let crossed = scalar(1.0, 0.0).with_bounds(vec![2.0], vec![1.0]);
        let sol = solve_qp(&crossed, DEFAULT_TOL, 100).unwrap();
        assert!(matches!(sol.status, QpStatus::Infeasible { .. }));

        let mut eqs = QPInstance::new(2).with_objective(Matrix::identity(2), vec![0.0, 0.0]);
        eqs.push_eq(&[1.0, 1.0], 1.0);
        eqs.push_eq(&[2.0, 2.0], 3.0);
        let sol = solve_qp(&eqs, DEFAULT_TOL, 100).unwrap();
        assert!(matches!(sol.status, QpStatus::Infeasible { .. }));
    }

    #[test]
    fn redundant_equalities_are_skipped() {
        let mut eqs = QPInstance::new(2).with_objective(Matrix::identity(2), vec![0.0, 0.0]);
        eqs.push_eq(&[1.0, 1.0], 1.0);
        eqs.push_eq(&[2.0, 2.0], 2.0);
        let sol = solve_qp(&eqs, DEFAULT_TOL, 100).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.z[0] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn linear_program_via_proximal_loop() {
        // max x + y s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0 → (1.6, 1.2)
        let mut lp = QPInstance::new(2).with_objective(Matrix::zeros(2, 2), vec![-1.0, -1.0]);
        lp.push_ineq(&[1.0, 2.0], 4.0);
        lp.push_ineq(&[3.0, 1.0], 6.0);
        lp.lb = vec![0.0, 0.0];
        let sol = solve_qp(&lp, DEFAULT_TOL, 500).unwrap();
        assert!(sol.is_optimal(), "{:?}", sol.status);
        assert!((sol.z[0] - 1.6).abs() < 1e-10 && (sol.z[1] - 1.2).abs() < 1e-10);
        assert!(sol.kkt_residual <= 1e-9);
    }

    #[test]
    fn unbounded_lp_is_reported() {
        let lp = QPInstance::new(1).with_objective(Matrix::zeros(1, 1), vec![-1.0]).with_bounds(vec![0.0], vec![f64::INFINITY]);
        let sol = solve_qp(&lp, DEFAULT_TOL, 50).unwrap();
        assert_eq!(sol.status, QpStatus::Unbounded);
    }

    #[test]
    fn infeasible_lp_has_certificate() {
        let mut lp = QPInstance::new(2).with_objective(Matrix::zeros(2, 2), vec![1.0, 1.0]);
        lp.push_eq(&[1.0, 1.0], 1.0);
        lp.lb = vec![0.0, 0.0];
        lp.ub = vec![0.25, 0.25];
        let sol = solve_qp(&lp, DEFAULT_TOL, 50).unwrap();
        assert!(matches!(sol.status, QpStatus::Infeasible { .. }));
    }

    #[test]
    fn lp_with_free_and_upper_bounded_variables() {
        // min y − x/2  s.t. y ≥ x − 1, y ≥ −x − 1, x ≤ 2 (x has no lower bound, y is free).
        // y = |x| − 1 at the optimum, so x = 0, y = −1; stationarity gives
        // multipliers 3/4 and 1/4, and the bound on x is slack.
        let mut lp = QPInstance::new(2).with_objective(Matrix::zeros(2, 2), vec![-0.5, 1.0]);
        lp.push_ineq(&[1.0, -1.0], 1.0);
        lp.push_ineq(&[-1.0, -1.0], 1.0);
        lp.ub = vec![2.0, f64::INFINITY];
        let sol = solve_qp(&lp, DEFAULT_TOL, 50).unwrap();
        assert!(sol.is_optimal(), "{:?}", sol.status);
        assert!(sol.z[0].abs() < 1e-12 && (sol.z[1] + 1.0).abs() < 1e-12);
        assert!((sol.duals.ineq[0] - 0.75).abs() < 1e-12 && (sol.duals.ineq[1] - 0.25).abs() < 1e-12);
        assert!(sol.duals.upper[0].abs() < 1e-12);
        assert!(sol.kkt_residual < 1e-12);
    }

    #[test]
    fn fixed_variable_multiplier_sign() {
        // min (z − 3)² with z fixed at 1 → multiplier pushes upward.
        let inst = scalar(2.0, -6.0).with_bounds(vec![1.0], vec![1.0]);
        let sol = solve_qp(&inst, DEFAULT_TOL, 100).unwrap();
        assert!(sol.is_optimal());
        assert_eq!(sol.z[0], 1.0);
        assert!((sol.duals.upper[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn perturbation_raises_residual() {
        let inst = scalar(1.0, 0.0).with_bounds(vec![1.0], vec![f64::INFINITY]);
        let mut sol = solve_qp(&inst, DEFAULT_TOL, 100).unwrap();
        sol.z[0] += 1.0;
        // stationarity violation is |z − ν| = 1; complementarity is also 1
        assert!(kkt_residual(&inst, &sol) >= 1.0 - 1e-12);
    }

    #[test]
    fn nearly_active_row_with_large_iterate() {
        // The unconstrained minimiser of z₀ sits at -430, where the general
        // row is satisfied by only a few nanounits. It must end up active.
        let inf = f64::INFINITY;
        let linear = vec![429.59416847633463, -1.959234838544011, -0.9820129203829117, -2.039722415719161, -0.019051177904033576, 2.0];
        let inst = QPInstance::new(6)
            .with_objective(Matrix::identity(6), linear)
            .with_eq(Matrix::from_rows(&[vec![0.0, 1.0, 1.0, 1.0, 1.0, 0.0]]), vec![5.0])
            .with_ineq(Matrix::from_rows(&[vec![-1.0, -50.0, -130.0, -100.0, 0.0, -1.0]]), vec![0.0])
            .with_bounds(vec![-inf, 0.0, 0.0, 0.0, 0.0, 0.0], vec![inf, 4.0, 0.9838869071941505, 2.771262094423436, inf, inf]);
        let sol = solve_qp(&inst, DEFAULT_TOL, 100).unwrap();
        assert!(sol.is_optimal(), "{:?} kkt {:e}", sol.status, sol.kkt_residual);
        assert!(inst.max_violation(&sol.z) <= 1e-10);
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut inst = QPInstance::new(2);
        inst.b_eq.push(1.0);
        assert!(matches!(solve_qp(&inst, 1e-9, 10), Err(Error::Dimension(_))));
        let asym = QPInstance::new(2).with_objective(Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]), vec![0.0; 2]);
        assert!(asym.validate().is_err());
    }
}
