//! Dense bounded-variable primal simplex for the linear case of [`QPInstance`].
//!
//! Every variable is rewritten as a nonnegative column (shifted from a finite
//! bound, reflected from a finite upper bound, or split when free), each
//! inequality gets a slack, rows are sign-normalized so the right-hand side is
//! nonnegative, and an artificial column per row gives the phase-one basis.
//! Nonbasic columns sit at either of their bounds, so finite upper bounds never
//! become rows. The final point and duals are recomputed from the basis with a
//! fresh factorization instead of being read off the updated tableau.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{norm_inf, solve_dense, Matrix};
use crate::qpsolve::{ActiveSet, ConstraintRef, Duals, QPInstance, QPSolution, QpStatus};

/// How an original variable maps to internal columns.
#[derive(Debug, Clone, Copy)]
enum Map {
    /// `x = base + t`.
    Shift { col: usize, base: f64 },
    /// `x = base − t`.
    Reflect { col: usize, base: f64 },
    /// `x = t⁺ − t⁻`.
    Split { pos: usize, neg: usize },
}

struct Standard {
    /// Row-major `m × ncols` constraint matrix including slacks and artificials.
    a: Matrix,
    b: Vec<f64>,
    cost: Vec<f64>,
    upper: Vec<f64>,
    /// Row sign applied during normalization.
    row_sign: Vec<f64>,
    maps: Vec<Map>,
    /// Column of the slack of inequality `i`.
    slack: Vec<usize>,
    first_artificial: usize,
    n_eq: usize,
}

fn standardize(inst: &QPInstance) -> Standard {
    let n = inst.dim();
    let n_eq = inst.b_eq.len();
    let m = n_eq + inst.b_in.len();
    let mut maps = Vec::with_capacity(n);
    let mut upper = Vec::new();
    let mut ncols = 0;
    for j in 0..n {
        let (lo, hi) = (inst.lb[j], inst.ub[j]);
        let map = if lo.is_finite() {
            upper.push(hi - lo);
            Map::Shift { col: ncols, base: lo }
        } else if hi.is_finite() {
            upper.push(f64::INFINITY);
            Map::Reflect { col: ncols, base: hi }
        } else {
            upper.push(f64::INFINITY);
            upper.push(f64::INFINITY);
            ncols += 1;
            Map::Split { pos: ncols - 1, neg: ncols }
        };
        ncols += 1;
        maps.push(map);
    }
    let slack: Vec<usize> = (0..inst.b_in.len()).map(|i| ncols + i).collect();
    ncols += inst.b_in.len();
    upper.extend(core::iter::repeat(f64::INFINITY).take(inst.b_in.len()));
    let first_artificial = ncols;
    ncols += m;
    upper.extend(core::iter::repeat(f64::INFINITY).take(m));

    let mut a = Matrix::zeros(m, ncols);
    let mut b = vec![0.0; m];
    let mut cost = vec![0.0; ncols];
    for (j, map) in maps.iter().enumerate() {
        match *map {
            Map::Shift { col, .. } => cost[col] = inst.linear[j],
            Map::Reflect { col, .. } => cost[col] = -inst.linear[j],
            Map::Split { pos, neg } => {
                cost[pos] = inst.linear[j];
                cost[neg] = -inst.linear[j];
            }
        }
    }
    for i in 0..m {
        let (row, rhs) = if i < n_eq { (inst.a_eq.row(i), inst.b_eq[i]) } else { (inst.a_in.row(i - n_eq), inst.b_in[i - n_eq]) };
        let mut rhs = rhs;
        for (j, map) in maps.iter().enumerate() {
            let v = row[j];
            if v == 0.0 {
                continue;
            }
            match *map {
                Map::Shift { col, base } => {
                    a[(i, col)] = v;
                    rhs -= v * base;
                }
                Map::Reflect { col, base } => {
                    a[(i, col)] = -v;
                    rhs -= v * base;
                }
                Map::Split { pos, neg } => {
                    a[(i, pos)] = v;
                    a[(i, neg)] = -v;
                }
            }
        }
        if i >= n_eq {
            a[(i, slack[i - n_eq])] = 1.0;
        }
        b[i] = rhs;
    }
    let mut row_sign = vec![1.0; m];
    for i in 0..m {
        if b[i] < 0.0 {
            row_sign[i] = -1.0;
            b[i] = -b[i];
            a.row_mut(i).iter_mut().for_each(|v| *v = -*v);
        }
        a[(i, first_artificial + i)] = 1.0;
    }
    Standard { a, b, cost, upper, row_sign, maps, slack, first_artificial, n_eq }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Optimal,
    Unbounded,
    MaxIter,
}

struct Tableau {
    t: Matrix,
    /// Values of the basic variables.
    xb: Vec<f64>,
    basis: Vec<usize>,
    /// Nonbasic column sits at its upper bound.
    at_upper: Vec<bool>,
    is_basic: Vec<bool>,
    upper: Vec<f64>,
    pivots: usize,
}

const PIVOT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 50;

impl Tableau {
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (i, &k) in self.basis.iter().enumerate() {
            let cb = cost[k];
            if cb != 0.0 {
                for (dj, tij) in d.iter_mut().zip(self.t.row(i)) {
                    *dj -= cb * tij;
                }
            }
        }
        d
    }

    /// Runs the primal simplex for `cost`; columns with `allowed[k] == false`
    /// never enter.
    fn run(&mut self, cost: &[f64], allowed: &[bool], max_pivots: usize) -> Phase {
        let ncols = cost.len();
        let mut d = self.reduced_costs(cost);
        let dtol = 1e-11 * (1.0 + norm_inf(cost));
        let mut streak = 0;
        loop {
            let bland = streak >= DEGENERATE_STREAK;
            let mut enter = None;
            let mut best = 0.0;
            for k in 0..ncols {
                if self.is_basic[k] || !allowed[k] {
                    continue;
                }
                let gain = if self.at_upper[k] { d[k] } else { -d[k] };
                if gain > dtol {
                    if bland {
                        enter = Some(k);
                        break;
                    }
                    if gain > best {
                        best = gain;
                        enter = Some(k);
                    }
                }
            }
            let Some(k) = enter else { return Phase::Optimal };
            if self.pivots >= max_pivots {
                return Phase::MaxIter;
            }
            // Moving x_k by +θ·dir changes x_B by −θ·dir·T[:,k].
            let dir = if self.at_upper[k] { -1.0 } else { 1.0 };
            let mut theta = self.upper[k];
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_mag = 0.0;
            for i in 0..self.basis.len() {
                let alpha = dir * self.t[(i, k)];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let bi = self.basis[i];
                let (limit, to_upper) = if alpha > 0.0 {
                    ((self.xb[i]).max(0.0) / alpha, false)
                } else if self.upper[bi].is_finite() {
                    (((self.upper[bi] - self.xb[i]).max(0.0)) / -alpha, true)
                } else {
                    continue;
                };
                let better = match leave {
                    None => limit < theta,
                    Some((li, _)) => {
                        limit < theta - 1e-12
                            || (limit <= theta + 1e-12
                                && if bland { bi < self.basis[li] } else { alpha.abs() > leave_mag })
                    }
                };
                if better {
                    theta = theta.min(limit);
                    leave = Some((i, to_upper));
                    leave_mag = alpha.abs();
                }
            }
            if theta.is_infinite() {
                return Phase::Unbounded;
            }
            streak = if theta <= 1e-12 { streak + 1 } else { 0 };
            self.pivots += 1;
            for i in 0..self.basis.len() {
                self.xb[i] -= theta * dir * self.t[(i, k)];
            }
            match leave {
                None => {
                    // Bound flip, no basis change.
                    self.at_upper[k] = !self.at_upper[k];
                }
                Some((r, to_upper)) => {
                    let entering_value = if self.at_upper[k] { self.upper[k] - theta } else { theta };
                    let out = self.basis[r];
                    self.is_basic[out] = false;
                    self.at_upper[out] = to_upper;
                    self.is_basic[k] = true;
                    self.at_upper[k] = false;
                    self.basis[r] = k;
                    self.xb[r] = entering_value;
                    self.pivot(r, k, &mut d);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, k: usize, d: &mut [f64]) {
        let piv = self.t[(r, k)];
        self.t.row_mut(r).iter_mut().for_each(|v| *v /= piv);
        let prow: Vec<f64> = self.t.row(r).to_vec();
        for i in 0..self.basis.len() {
            if i == r {
                continue;
            }
            let f = self.t[(i, k)];
            if f != 0.0 {
                for (v, p) in self.t.row_mut(i).iter_mut().zip(&prow) {
                    *v -= f * p;
                }
            }
        }
        let f = d[k];
        if f != 0.0 {
            for (v, p) in d.iter_mut().zip(&prow) {
                *v -= f * p;
            }
        }
    }
}

/// Solves the linear program `inst` (its Hessian is ignored).
pub(crate) fn solve_lp(inst: &QPInstance, max_pivots: usize) -> QPSolution {
    let std = standardize(inst);
    let m = std.b.len();
    let ncols = std.cost.len();
    let mut tab = Tableau {
        t: std.a.clone(),
        xb: std.b.clone(),
        basis: (0..m).map(|i| std.first_artificial + i).collect(),
        at_upper: vec![false; ncols],
        is_basic: (0..ncols).map(|k| k >= std.first_artificial).collect(),
        upper: std.upper.clone(),
        pivots: 0,
    };
    let n = inst.dim();
    let fail = |status: QpStatus, pivots: usize| QPSolution {
        z: vec![0.0; n],
        duals: Duals {
            eq: vec![0.0; inst.b_eq.len()],
            ineq: vec![0.0; inst.b_in.len()],
            lower: vec![0.0; n],
            upper: vec![0.0; n],
        },
        status,
        kkt_residual: f64::INFINITY,
        active: ActiveSet::default(),
        iterations: pivots,
    };

    // Phase one: drive the artificials to zero.
    let mut phase1 = vec![0.0; ncols];
    phase1[std.first_artificial..].iter_mut().for_each(|c| *c = 1.0);
    let everything = vec![true; ncols];
    if tab.run(&phase1, &everything, max_pivots) == Phase::MaxIter {
        return fail(QpStatus::MaxIter, tab.pivots);
    }
    let infeas: f64 = tab.basis.iter().zip(&tab.xb).filter(|(&k, _)| k >= std.first_artificial).map(|(_, v)| *v).sum();
    let scale = 1.0 + norm_inf(&std.b);
    if infeas > 1e-9 * scale {
        let certificate = format!("phase one ends with total artificial value {infeas:e}");
        return fail(QpStatus::Infeasible { certificate }, tab.pivots);
    }

    // Phase two: artificials are pinned at zero and may not re-enter.
    for k in std.first_artificial..ncols {
        tab.upper[k] = 0.0;
    }
    let allowed: Vec<bool> = (0..ncols).map(|k| k < std.first_artificial).collect();
    let phase = tab.run(&std.cost, &allowed, max_pivots);
    let pivots = tab.pivots;

    let (xb, y) = refine(&std, &tab);
    let mut t = vec![0.0; ncols];
    for k in 0..ncols {
        if !tab.is_basic[k] && tab.at_upper[k] {
            t[k] = tab.upper[k];
        }
    }
    for (i, &k) in tab.basis.iter().enumerate() {
        t[k] = xb[i];
    }
    let z: Vec<f64> = std
        .maps
        .iter()
        .enumerate()
        .map(|(j, map)| {
            let v = match *map {
                Map::Shift { col, base } => base + t[col],
                Map::Reflect { col, base } => base - t[col],
                Map::Split { pos, neg } => t[pos] - t[neg],
            };
            v.max(inst.lb[j]).min(inst.ub[j])
        })
        .collect();

    if phase == Phase::Unbounded {
        return QPSolution { z, ..fail(QpStatus::Unbounded, pivots) };
    }

    let mut duals = Duals {
        eq: (0..std.n_eq).map(|i| -std.row_sign[i] * y[i]).collect(),
        ineq: (0..inst.b_in.len()).map(|i| (-std.row_sign[std.n_eq + i] * y[std.n_eq + i]).max(0.0)).collect(),
        lower: vec![0.0; n],
        upper: vec![0.0; n],
    };
    let mut g = inst.linear.clone();
    for (gj, v) in g.iter_mut().zip(inst.a_eq.tr_mul_vec(&duals.eq)) {
        *gj += v;
    }
    for (gj, v) in g.iter_mut().zip(inst.a_in.tr_mul_vec(&duals.ineq)) {
        *gj += v;
    }
    for j in 0..n {
        if g[j] > 0.0 && inst.lb[j].is_finite() {
            duals.lower[j] = g[j];
        } else if g[j] < 0.0 && inst.ub[j].is_finite() {
            duals.upper[j] = -g[j];
        }
    }

    let mut active: Vec<ConstraintRef> = (0..std.n_eq).map(ConstraintRef::Eq).collect();
    for (i, &s) in std.slack.iter().enumerate() {
        if t[s] <= 1e-12 * scale {
            active.push(ConstraintRef::Ineq(i));
        }
    }
    for j in 0..n {
        if z[j] == inst.lb[j] {
            active.push(ConstraintRef::Lower(j));
        } else if z[j] == inst.ub[j] {
            active.push(ConstraintRef::Upper(j));
        }
    }
    let status = if phase == Phase::Optimal { QpStatus::Optimal } else { QpStatus::MaxIter };
    QPSolution { z, duals, status, kkt_residual: f64::INFINITY, active: ActiveSet(active), iterations: pivots }
}

/// Recomputes basic values `B x_B = b − Σ_upper A_k u_k` and row duals
/// `Bᵀ y = c_B` from the original columns; falls back to the tableau values
/// if the basis matrix is numerically singular.
fn refine(std: &Standard, tab: &Tableau) -> (Vec<f64>, Vec<f64>) {
    let m = std.b.len();
    let ncols = std.cost.len();
    let mut bmat = Matrix::zeros(m, m);
    for (c, &k) in tab.basis.iter().enumerate() {
        for i in 0..m {
            bmat[(i, c)] = std.a[(i, k)];
        }
    }
    let mut rhs = std.b.clone();
    for k in 0..ncols {
        if !tab.is_basic[k] && tab.at_upper[k] && tab.upper[k] != 0.0 {
            for (i, r) in rhs.iter_mut().enumerate() {
                *r -= std.a[(i, k)] * tab.upper[k];
            }
        }
    }
    let xb = solve_dense(&bmat, &rhs).unwrap_or_else(|| tab.xb.clone());
    let cb: Vec<f64> = tab.basis.iter().map(|&k| std.cost[k]).collect();
    let y = solve_dense(&bmat.transpose(), &cb).unwrap_or_else(|| {
        // Read the duals off the artificial columns of the tableau.
        let d = tab.reduced_costs(&std.cost);
        (0..m).map(|i| -d[std.first_artificial + i]).collect()
    });
    (xb, y)
}
