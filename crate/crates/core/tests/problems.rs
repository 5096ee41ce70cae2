mod oracles;

use hedgekit_core::measures::{eval_risk, MeasureSpec, RandomVariable};
use hedgekit_core::problems::*;

fn random(n1: usize, n2: usize, sn: usize, seed: u64) -> TwoStageLPData {
    gen_random_instance(n1, n2, sn, seed).unwrap()
}

fn optimum(data: &TwoStageLPData, m: &MeasureSpec) -> ExtensiveSolution {
    solve_extensive(&build_two_stage(data, m).unwrap(), 1e-10).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn models() -> Vec<MeasureSpec> {
    vec![
        MeasureSpec::expectation(),
        MeasureSpec::cvar(0.5).unwrap(),
        MeasureSpec::oce(2.0, 0.5).unwrap(),
    ]
}

#[test]
fn splitting_a_scenario_changes_nothing() {
    for seed in 0..6 {
        let data = random(3, 4, 7, seed);
        let split = data.with_split_scenario(seed as usize % 7).unwrap();
        assert_eq!(split.space.len(), 8);
        for m in models() {
            let (a, b) = (optimum(&data, &m).objective, optimum(&split, &m).objective);
            assert!(close(a, b, 1e-9), "seed {seed}, {m:?}: {a} vs {b}");
        }
    }
}

#[test]
fn cvar_value_grows_with_alpha() {
    for seed in 0..5 {
        let data = random(2, 5, 15, 100 + seed);
        let values: Vec<f64> = [0.0, 0.25, 0.5, 0.9]
            .iter()
            .map(|&a| optimum(&data, &MeasureSpec::cvar(a).unwrap()).objective)
            .collect();
        for w in values.windows(2) {
            assert!(w[0] <= w[1] + 1e-9, "seed {seed}: {values:?}");
        }
    }
}

#[test]
fn risk_averse_models_cost_at_least_the_expectation() {
    for seed in 0..5 {
        let data = random(4, 3, 12, 200 + seed);
        let e = optimum(&data, &MeasureSpec::expectation()).objective;
        for m in &models()[1..] {
            assert!(optimum(&data, m).objective >= e - 1e-9);
        }
    }
}

#[test]
fn cvar_at_zero_is_the_expectation() {
    for seed in 0..5 {
        let data = random(3, 3, 10, 300 + seed);
        let e = optimum(&data, &MeasureSpec::expectation()).objective;
        let c = optimum(&data, &MeasureSpec::cvar(0.0).unwrap()).objective;
        assert!(close(e, c, 1e-9), "{e} vs {c}");
    }
    let air = gen_airline_instance(20, 4).unwrap();
    let e = optimum(&air, &MeasureSpec::expectation()).objective;
    let c = optimum(&air, &MeasureSpec::cvar(0.0).unwrap()).objective;
    assert!(close(e, c, 1e-9));
}

/// The optimal value of a regret model is the risk of the cost distribution
/// that its own optimal decisions produce.
#[test]
fn model_value_is_the_risk_of_its_cost_distribution() {
    for seed in 0..4 {
        let data = random(3, 4, 9, 400 + seed);
        for m in models() {
            let sol = optimum(&data, &m);
            let x1 = first_stage_x1_range(&m, data.n1);
            let lead = x1.start;
            let costs: Vec<f64> = (0..data.space.len())
                .map(|i| {
                    let z = sol.z.scenario(i);
                    let s = &data.scenarios[i];
                    let first: f64 = s.q.iter().zip(&z[x1.clone()]).map(|(a, b)| a * b).sum();
                    let second: f64 = s.c.iter().zip(&z[lead + data.n1..lead + data.n1 + data.n2]).map(|(a, b)| a * b).sum();
                    first + second
                })
                .collect();
            let rv = RandomVariable::new(costs, data.space.probabilities().to_vec()).unwrap();
            let risk = eval_risk(&m, &rv);
            assert!(close(sol.objective, risk, 1e-8), "seed {seed}, {m:?}: {} vs {risk}", sol.objective);
        }
    }
}

/// With `x₁` pinned, CVaR is monotone, so the best recourse is the cheapest
/// one in every scenario and the value is the CVaR of those costs.
#[test]
fn pinned_first_stage_cvar_matches_scenario_recourse() {
    let data = random(2, 3, 4, 77);
    let alpha = 0.5;
    let prog = build_cvar_two_stage(&data, alpha).unwrap();
    for x1 in [[0.0, 0.0], [0.3, 0.9], [1.0, 0.5], [1.0, 1.0]] {
        let mut ef = build_extensive_form(&prog).unwrap();
        for (j, &x) in x1.iter().enumerate() {
            let c = ef.columns[0][1 + j];
            ef.qp.lb[c] = x;
            ef.qp.ub[c] = x;
        }
        let pinned = ef.solve(&prog, 1e-10).unwrap().objective;
        let costs: Vec<f64> = (0..4).map(|i| data.recourse_value(i, &x1).unwrap()).collect();
        let reference = oracles::cvar_by_atom_scan(&costs, data.space.probabilities(), alpha);
        assert!(close(pinned, reference, 1e-9), "x1 = {x1:?}: {pinned} vs {reference}");
    }
}

#[test]
fn airline_structure() {
    let data = gen_airline_instance(6, 1).unwrap();
    assert_eq!((data.n1, data.n2, data.space.len()), (1, 3, 6));
    for s in &data.scenarios {
        assert!(s.x2_upper[0] >= 0.0 && s.x2_upper[1] >= 0.0);
    }
    let e = optimum(&data, &MeasureSpec::expectation()).objective;
    let c = optimum(&data, &MeasureSpec::cvar(0.5).unwrap()).objective;
    assert!(e <= c + 1e-9);
}

#[test]
fn oce_with_cvar_weights_is_cvar() {
    for (seed, alpha) in [(1u64, 0.25), (2, 0.5), (3, 0.8)] {
        let data = random(3, 3, 8, 500 + seed);
        let oce = optimum(&data, &MeasureSpec::oce(1.0 / (1.0 - alpha), 0.0).unwrap()).objective;
        let cvar = optimum(&data, &MeasureSpec::cvar(alpha).unwrap()).objective;
        assert!(close(oce, cvar, 1e-8), "alpha {alpha}: {oce} vs {cvar}");
    }
}

#[test]
fn oce_split_is_tight_at_the_optimum() {
    for seed in 0..5 {
        let data = random(2, 4, 10, 600 + seed);
        let sol = optimum(&data, &MeasureSpec::oce(2.0, 0.5).unwrap());
        let aux = 1 + data.n1 + data.n2;
        for i in 0..data.space.len() {
            let z = sol.z.scenario(i);
            assert!(z[aux] * z[aux + 1] <= 1e-8, "seed {seed}, scenario {i}: s+ {} s- {}", z[aux], z[aux + 1]);
        }
    }
}

/// One scenario: every model reduces to the deterministic two-stage LP.
#[test]
fn single_scenario_models_agree() {
    let data = random(3, 4, 1, 9);
    let det = optimum(&data, &MeasureSpec::expectation()).objective;
    let template = build_expectation_two_stage(&data).unwrap().templates[0].clone();
    let direct = hedgekit_core::qpsolve::solve_qp(&template, 1e-10, 10_000).unwrap();
    assert!(direct.is_optimal());
    assert!(close(det, template.objective(&direct.z), 1e-9));
    for m in models() {
        assert!(close(optimum(&data, &m).objective, det, 1e-8), "{m:?}");
    }
}

#[test]
fn policy_value_at_the_optimum_is_the_optimal_value() {
    for seed in 0..3 {
        let data = random(3, 4, 6, 700 + seed);
        for m in models() {
            let sol = optimum(&data, &m);
            let x1 = &sol.z.scenario(0)[first_stage_x1_range(&m, data.n1)];
            let v = data.policy_value(&m, x1).expect("recourse is feasible");
            assert!(close(v, sol.objective, 1e-8), "seed {seed}, {m:?}: {v} vs {}", sol.objective);
        }
    }
}
