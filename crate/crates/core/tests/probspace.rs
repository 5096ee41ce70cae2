use hedgekit_core::probspace::{
    inner_product, project_m, project_n, FiniteProbSpace, InformationPartition, PolicyVector, Scenario,
};
use proptest::prelude::*;

/// A random scenario tree: components come from a tiny alphabet so that
/// histories collide and classes of every size appear.
fn tree() -> impl Strategy<Value = (FiniteProbSpace, InformationPartition, Vec<usize>)> {
    (1usize..=4, 1usize..=12).prop_flat_map(|(stages, n)| {
        (
            prop::collection::vec(prop::collection::vec(0u8..2, stages), n),
            prop::collection::vec(0.05f64..1.0, n),
            prop::collection::vec(0usize..=3, stages),
        )
            .prop_map(move |(hist, weights, dims)| {
                let total: f64 = weights.iter().sum();
                let scen = hist
                    .iter()
                    .enumerate()
                    .map(|(i, h)| Scenario::new(i as u64, h.iter().map(|&b| vec![f64::from(b)]).collect()))
                    .collect();
                let probs = weights.iter().map(|w| w / total).collect();
                let space = FiniteProbSpace::new(scen, probs).unwrap();
                let part = InformationPartition::from_history(&space);
                let dims = dims.iter().map(|d| d + 1).collect();
                (space, part, dims)
            })
    })
}

fn policy(space: &FiniteProbSpace, dims: &[usize], seed: &[f64]) -> PolicyVector {
    let width: usize = dims.iter().sum();
    let data = (0..space.len() * width).map(|k| seed[k % seed.len()] * (1.0 + k as f64).sin()).collect();
    PolicyVector::from_flat(data, dims).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projections_are_complementary_orthogonal_and_idempotent(
        (space, part, dims) in tree(),
        sa in prop::collection::vec(-5.0f64..5.0, 1..8),
        sb in prop::collection::vec(-5.0f64..5.0, 1..8),
    ) {
        let a = policy(&space, &dims, &sa);
        let b = policy(&space, &dims, &sb);
        let na = project_n(&a, &part, &space).unwrap();
        let ma = project_m(&a, &part, &space).unwrap();
        for ((x, n), m) in a.as_slice().iter().zip(na.as_slice()).zip(ma.as_slice()) {
            prop_assert!((n + m - x).abs() <= 1e-12 * (1.0 + x.abs()));
        }
        prop_assert_eq!(&project_n(&na, &part, &space).unwrap(), &na);
        let nb = project_n(&b, &part, &space).unwrap();
        let mb = project_m(&b, &part, &space).unwrap();
        let lhs = inner_product(&na, &b, &space).unwrap();
        let rhs = inner_product(&a, &nb, &space).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10);
        prop_assert!(inner_product(&na, &mb, &space).unwrap().abs() <= 1e-10);

        // P_M output has zero conditional mean on every class.
        for stage in 1..=part.stages() {
            for class in part.classes(stage) {
                let mass: f64 = class.iter().map(|&i| space.prob(i)).sum();
                for j in 0..dims[stage - 1] {
                    let mean: f64 = class.iter().map(|&i| space.prob(i) * ma.stage_block(i, stage)[j]).sum::<f64>() / mass;
                    prop_assert!(mean.abs() <= 1e-12 * (1.0 + sa.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
                }
            }
        }
    }
}
