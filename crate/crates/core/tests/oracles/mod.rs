//! Independent reference implementations used by the test suites.
//!
//! Nothing here calls into the solver paths it is used to check.
#![allow(dead_code)]

use hedgekit_core::linalg::Matrix;
use hedgekit_core::qpsolve::QPInstance;
use rand::Rng;

/// Gaussian elimination with partial pivoting on a copy of `a`.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for i in col + 1..n {
            let f = a[i][col] / a[col][col];
            for j in col..n {
                a[i][j] -= f * a[col][j];
            }
            b[i] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Minimizes a strictly convex QP by enumerating every subset of inequality
/// rows (bounds included) as active, solving each equality-constrained KKT
/// system, and keeping the best feasible candidate.
pub fn enumerate_active_sets(inst: &QPInstance) -> Option<Vec<f64>> {
    let n = inst.linear.len();
    let mut eq_rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..inst.b_eq.len() {
        eq_rows.push((inst.a_eq.row(i).to_vec(), inst.b_eq[i]));
    }
    let mut in_rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..inst.b_in.len() {
        in_rows.push((inst.a_in.row(i).to_vec(), inst.b_in[i]));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        if inst.lb[j].is_finite() {
            e[j] = -1.0;
            in_rows.push((e.clone(), -inst.lb[j]));
        }
        if inst.ub[j].is_finite() {
            e[j] = 1.0;
            in_rows.push((e, inst.ub[j]));
        }
    }
    let feasible = |z: &[f64]| {
        eq_rows.iter().all(|(a, b)| (dot(a, z) - b).abs() <= 1e-9)
            && in_rows.iter().all(|(a, b)| dot(a, z) - b <= 1e-9)
    };
    let objective = |z: &[f64]| {
        let mut v = dot(&inst.linear, z);
        for i in 0..n {
            for j in 0..n {
                v += 0.5 * z[i] * inst.hessian[(i, j)] * z[j];
            }
        }
        v
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << in_rows.len()) {
        let mut rows: Vec<&(Vec<f64>, f64)> = eq_rows.iter().collect();
        for (k, r) in in_rows.iter().enumerate() {
            if mask & (1 << k) != 0 {
                rows.push(r);
            }
        }
        let m = rows.len();
        let dim = n + m;
        let mut kkt = vec![vec![0.0; dim]; dim];
        let mut rhs = vec![0.0; dim];
        for i in 0..n {
            for j in 0..n {
                kkt[i][j] = inst.hessian[(i, j)];
            }
            rhs[i] = -inst.linear[i];
        }
        for (r, (a, b)) in rows.iter().enumerate() {
            for j in 0..n {
                kkt[j][n + r] = a[j];
                kkt[n + r][j] = a[j];
            }
            rhs[n + r] = *b;
        }
        let Some(sol) = gauss_solve(kkt, rhs) else { continue };
        let z = &sol[..n];
        if !feasible(z) {
            continue;
        }
        let f = objective(z);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf - 1e-12) {
            best = Some((f, z.to_vec()));
        }
    }
    best.map(|(_, z)| z)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Random strictly convex QP (dimension ≤ 6, at most 4 constraints including
/// finite bounds) that is feasible by construction.
pub fn random_small_qp<R: Rng>(rng: &mut R) -> QPInstance {
    let n = rng.random_range(1..=6);
    let mut m = vec![vec![0.0; n]; n];
    for row in m.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    let mut q = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..n).map(|k| m[k][i] * m[k][j]).sum();
            q[(i, j)] = s + if i == j { 0.2 } else { 0.0 };
        }
    }
    let lin: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let anchor: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut inst = QPInstance::new(n).with_objective(q, lin);
    let total = rng.random_range(0..=4);
    for _ in 0..total {
        match rng.random_range(0..4) {
            0 if inst.b_eq.len() + 1 < n => {
                let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let b = dot(&a, &anchor);
                inst.push_eq(&a, b);
            }
            1 => {
                let j = rng.random_range(0..n);
                if inst.lb[j].is_infinite() {
                    inst.lb[j] = anchor[j] - rng.random_range(0.0..0.5);
                }
            }
            2 => {
                let j = rng.random_range(0..n);
                if inst.ub[j].is_infinite() {
                    inst.ub[j] = anchor[j] + rng.random_range(0.0..0.5);
                }
            }
            _ => {
                let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let b = dot(&a, &anchor) + rng.random_range(0.0..0.5);
                inst.push_ineq(&a, b);
            }
        }
    }
    inst
}

/// CVaR by scanning `y + E(ξ − y)₊/(1 − α)` over the atoms; the function is
/// piecewise linear in `y` with kinks only there.
pub fn cvar_by_atom_scan(values: &[f64], probs: &[f64], alpha: f64) -> f64 {
    values
        .iter()
        .map(|&y| y + values.iter().zip(probs).map(|(v, p)| p * (v - y).max(0.0)).sum::<f64>() / (1.0 - alpha))
        .fold(f64::INFINITY, f64::min)
}

/// `E ξ + λ E (ξ − E ξ)₊`, the mean-deviation penalty with the L¹ norm.
pub fn mean_dev_l1(values: &[f64], probs: &[f64], lambda: f64) -> f64 {
    let e = dot(values, probs);
    e + lambda * values.iter().zip(probs).map(|(v, p)| p * (v - e).max(0.0)).sum::<f64>()
}

/// Random weights on `n` atoms, normalized to sum to one.
pub fn random_probs<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let t: f64 = w.iter().sum();
    w.iter().map(|x| x / t).collect()
}

/// Minimizes a linear program with a pointed feasible region by trying every
/// choice of `n` tight rows (equalities always included), solving the square
/// system, and keeping the best feasible vertex. Returns `(value, vertex)`.
pub fn enumerate_vertices(inst: &QPInstance) -> Option<(f64, Vec<f64>)> {
    let n = inst.linear.len();
    let eq_rows: Vec<(Vec<f64>, f64)> = (0..inst.b_eq.len()).map(|i| (inst.a_eq.row(i).to_vec(), inst.b_eq[i])).collect();
    let mut in_rows: Vec<(Vec<f64>, f64)> = (0..inst.b_in.len()).map(|i| (inst.a_in.row(i).to_vec(), inst.b_in[i])).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        if inst.lb[j].is_finite() {
            e[j] = -1.0;
            in_rows.push((e.clone(), -inst.lb[j]));
        }
        if inst.ub[j].is_finite() {
            e[j] = 1.0;
            in_rows.push((e, inst.ub[j]));
        }
    }
    let need = n.checked_sub(eq_rows.len())?;
    let feasible = |z: &[f64]| {
        eq_rows.iter().all(|(a, b)| (dot(a, z) - b).abs() <= 1e-9) && in_rows.iter().all(|(a, b)| dot(a, z) - b <= 1e-9)
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << in_rows.len()) {
        if mask.count_ones() as usize != need {
            continue;
        }
        let mut rows: Vec<(Vec<f64>, f64)> = eq_rows.clone();
        for (k, r) in in_rows.iter().enumerate() {
            if mask & (1 << k) != 0 {
                rows.push(r.clone());
            }
        }
        let (a, b): (Vec<Vec<f64>>, Vec<f64>) = rows.into_iter().unzip();
        let Some(z) = gauss_solve(a, b) else { continue };
        if !feasible(&z) {
            continue;
        }
        let f = dot(&inst.linear, &z);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, z));
        }
    }
    best
}

/// Random linear program (dimension ≤ 4) that is feasible around an anchor
/// point and bounded below: every variable has a box, or a single bound on the
/// side its cost pushes towards.
pub fn random_small_lp<R: Rng>(rng: &mut R) -> QPInstance {
    let n = rng.random_range(1..=4);
    let lin: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let anchor: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut inst = QPInstance::new(n).with_objective(Matrix::zeros(n, n), lin.clone());
    for j in 0..n {
        match rng.random_range(0..3) {
            0 if lin[j] > 0.0 => inst.lb[j] = anchor[j] - rng.random_range(0.0..1.0),
            0 => inst.ub[j] = anchor[j] + rng.random_range(0.0..1.0),
            _ => {
                inst.lb[j] = anchor[j] - rng.random_range(0.0..1.0);
                inst.ub[j] = anchor[j] + rng.random_range(0.0..1.0);
            }
        }
    }
    let rows = rng.random_range(0..=3);
    for _ in 0..rows {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if rng.random_range(0..4) == 0 && inst.b_eq.len() + 1 < n {
            let b = dot(&a, &anchor);
            inst.push_eq(&a, b);
        } else {
            let b = dot(&a, &anchor) + rng.random_range(0.0..0.5);
            inst.push_ineq(&a, b);
        }
    }
    inst
}

/// Infinity-norm distance from `point` to the set of near-optimal solutions of
/// the linear program `inst`, measured on the coordinates `cols`.
///
/// The near-optimal set is `{x feasible : c·x ≤ opt + slack}`. This is the
/// right yardstick when the optimum is not unique: any member of the face is
/// an equally valid answer. Solved as one more LP through `solve_qp`, whose LP
/// path is checked against vertex enumeration elsewhere.
pub fn distance_to_optimal_face(inst: &QPInstance, opt: f64, slack: f64, cols: &[usize], point: &[f64]) -> f64 {
    use hedgekit_core::qpsolve::solve_qp;
    let n = inst.linear.len();
    let widen = |m: &Matrix| {
        let mut out = Matrix::zeros(m.rows(), n + 1);
        for i in 0..m.rows() {
            out.row_mut(i)[..n].copy_from_slice(m.row(i));
        }
        out
    };
    let mut lp = QPInstance::new(n + 1);
    lp.linear[n] = 1.0;
    lp.a_eq = widen(&inst.a_eq);
    lp.b_eq = inst.b_eq.clone();
    lp.a_in = widen(&inst.a_in);
    lp.b_in = inst.b_in.clone();
    let mut row = inst.linear.clone();
    row.push(0.0);
    lp.a_in.push_row(&row);
    lp.b_in.push(opt + slack);
    for (&c, &x) in cols.iter().zip(point) {
        let mut up = vec![0.0; n + 1];
        up[c] = 1.0;
        up[n] = -1.0;
        lp.a_in.push_row(&up);
        lp.b_in.push(x);
        let mut down = vec![0.0; n + 1];
        down[c] = -1.0;
        down[n] = -1.0;
        lp.a_in.push_row(&down);
        lp.b_in.push(-x);
    }
    lp.lb[..n].copy_from_slice(&inst.lb);
    lp.ub[..n].copy_from_slice(&inst.ub);
    lp.lb[n] = 0.0;
    let sol = solve_qp(&lp, 1e-9, 100_000).expect("distance LP is well formed");
    assert!(sol.is_optimal(), "distance LP failed: {:?}", sol.status);
    sol.z[n]
}

/// A one-row expectation constraint `E[w(ξ)·z_S(ξ)] ≤ cap` on the coordinates
/// `cols`, with random weights in `[0, 1]` and the cap placed halfway between
/// the smallest attainable value and the value at the unconstrained optimum.
/// Returns `None` when that window is too narrow for the row to bind.
pub fn binding_expectation_row(
    prog: &hedgekit_core::pha::ScenarioProgram,
    cols: core::ops::Range<usize>,
    seed: u64,
) -> Option<hedgekit_core::exfunl::ExFunlConstraint> {
    use hedgekit_core::exfunl::ExFunlConstraint;
    use hedgekit_core::problems::solve_extensive;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = prog.width();
    let weights: Vec<Vec<f64>> = (0..prog.n_scenarios())
        .map(|_| {
            let mut w = vec![0.0; n];
            for j in cols.clone() {
                w[j] = rng.random_range(0.0..=1.0);
            }
            w
        })
        .collect();
    let mean_h = |z: &hedgekit_core::probspace::PolicyVector| -> f64 {
        (0..prog.n_scenarios()).map(|i| prog.space.prob(i) * dot(&weights[i], z.scenario(i))).sum()
    };
    let hi = mean_h(&solve_extensive(prog, 1e-9).ok()?.z);
    let mut low_prog = prog.clone();
    for (t, w) in low_prog.templates.iter_mut().zip(&weights) {
        t.hessian = Matrix::zeros(n, n);
        t.linear = w.clone();
    }
    let lo = solve_extensive(&low_prog, 1e-9).ok()?.objective;
    if hi - lo < 1e-2 * (1.0 + hi.abs()) {
        return None;
    }
    let cap = 0.5 * (lo + hi);
    let coefs = weights.iter().map(|w| Matrix::from_rows(&[w.clone()])).collect();
    ExFunlConstraint::new(coefs, vec![vec![-cap]; prog.n_scenarios()]).ok()
}
