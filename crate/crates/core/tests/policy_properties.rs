use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stl2vec::diffgraph::{GradCheck, GradCheckError, GraphError, ParamCoord};
use stl2vec::dynamics::Integrator;
use stl2vec::embedding::EmbeddingModel;
use stl2vec::policy::{
    batch_loss_graph, count_params, make_batches, LstmPolicy, Method, ParamDims, PolicyError, SpecEncoding,
};
use stl2vec::stl::{parse_with_dim, Formula, RobustnessMode, StlError};

fn specs() -> Vec<Formula> {
    [
        "F[0,4] x1 >= 1.5",
        "G[1,4] x2 <= -0.5",
        "F[0,2] x1 + x2 >= 1",
        "x1 >= 0 U[0,3] x2 >= 1",
    ]
    .iter()
    .map(|s| parse_with_dim(s, 2).unwrap())
    .collect()
}

fn integrator() -> Integrator {
    Integrator::new(vec![-1.0, -0.5], vec![1.0, 0.5]).unwrap()
}

fn as_graph_error(e: PolicyError) -> GraphError {
    match e {
        PolicyError::Stl(StlError::Graph(e)) => e,
        other => panic!("{other}"),
    }
}

/// Relative error of the batch loss gradient over 20 random parameter
/// entries, or `None` when an exact extremum sits too close to a tie.
fn loss_check(policy: &LstmPolicy, encoding: &SpecEncoding, mode: RobustnessMode, seed: u64) -> Option<f64> {
    let specs = specs();
    let dyn_ = integrator();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<ParamCoord> = policy
        .params()
        .iter()
        .enumerate()
        .flat_map(|(t, p)| (0..p.len()).map(move |e| (t, e)))
        .collect();
    let coords: Vec<ParamCoord> = all.choose_multiple(&mut rng, 20).copied().collect();
    let x0s = vec![vec![0.1, -0.2], vec![0.4, 0.3]];
    let res = GradCheck::default().run_subset(
        |g, vars| {
            batch_loss_graph(g, vars, policy, &specs, encoding, &dyn_, &[0, 2, 3], &x0s, 5, mode)
                .map_err(as_graph_error)
        },
        policy.params(),
        &coords,
    );
    match res {
        Ok(err) => Some(err),
        Err(GradCheckError::NonDifferentiable { .. }) => None,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outputs_are_strictly_inside_bounds(
        seed in 0u64..10_000,
        hidden in 1usize..16,
        layers in 1usize..3,
        scale in 0.5f64..3.0,
        inputs in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 4), 1..12),
    ) {
        let mut p = LstmPolicy::new(2, 2, hidden, layers, vec![0.0, -0.5], vec![1.0, 0.5], seed).unwrap();
        for t in p.params_mut() {
            for v in t.data_mut() {
                *v *= scale;
            }
        }
        let mut hs = p.initial_state();
        for s in &inputs {
            let (u, next) = p.step(&hs, s).unwrap();
            prop_assert!(0.0 < u[0] && u[0] < 1.0, "{:?}", u);
            prop_assert!(-0.5 < u[1] && u[1] < 0.5, "{:?}", u);
            hs = next;
        }
    }

    #[test]
    fn batches_partition_the_specs(m in 1usize..60, nb in 1usize..20, seed in 0u64..1000) {
        prop_assume!(nb <= m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..3 {
            let batches = make_batches(m, nb, &mut rng).unwrap();
            prop_assert_eq!(batches.len(), m / nb);
            let mut seen: Vec<usize> = batches.concat();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..m).collect::<Vec<_>>());
            for b in &batches[..batches.len() - 1] {
                prop_assert_eq!(b.len(), nb);
            }
        }
    }

    #[test]
    fn smooth_loss_gradient_matches_finite_differences(seed in 0u64..10_000, hidden in 2usize..6, layers in 1usize..3) {
        let encoding = SpecEncoding::OneHot { specs: 4 };
        let p = LstmPolicy::new(2, 4, hidden, layers, vec![-1.0, -0.5], vec![1.0, 0.5], seed).unwrap();
        let err = loss_check(&p, &encoding, RobustnessMode::Smooth { beta: 5.0 }, seed).unwrap();
        prop_assert!(err < 1e-3, "relative error {}", err);
    }

    #[test]
    fn exact_loss_gradient_matches_away_from_ties(seed in 0u64..10_000, hidden in 2usize..6) {
        let encoding = SpecEncoding::Stl2vec(EmbeddingModel::random(4, 3, seed));
        let p = LstmPolicy::new(2, 3, hidden, 1, vec![-1.0, -0.5], vec![1.0, 0.5], seed).unwrap();
        let err = loss_check(&p, &encoding, RobustnessMode::Exact, seed);
        prop_assume!(err.is_some());
        prop_assert!(err.unwrap() < 1e-3, "relative error {:?}", err);
    }

    #[test]
    fn rollout_input_is_state_plus_encoding(m in 2usize..10, dim in 1usize..6, which in 0usize..4) {
        let encoding = match which {
            0 => SpecEncoding::Stl2vec(EmbeddingModel::random(m, dim, 1)),
            1 => SpecEncoding::Integer { specs: m },
            2 => SpecEncoding::OneHot { specs: m },
            _ => SpecEncoding::None,
        };
        let p = LstmPolicy::new(2, encoding.dim(), 3, 1, vec![-1.0, -0.5], vec![1.0, 0.5], 0).unwrap();
        prop_assert_eq!(p.input_dim(), 2 + encoding.dim());
        if matches!(encoding, SpecEncoding::None) {
            prop_assert_eq!(p.input_dim(), 2);
        }
        for i in 0..m {
            let z = encoding.encode(i);
            prop_assert_eq!(z.len(), encoding.dim());
            let (traj, inputs) = p.rollout(&integrator(), &[0.0, 0.0], &z, 4).unwrap();
            prop_assert_eq!(traj.len(), 5);
            prop_assert_eq!(inputs.len(), 4);
        }
        let mut wrong = encoding.encode(0);
        wrong.push(0.0);
        prop_assert!(p.rollout(&integrator(), &[0.0, 0.0], &wrong, 4).is_err());
    }
}

#[test]
fn shared_controller_is_smaller_than_one_per_spec() {
    let d = ParamDims {
        specs: 194,
        embed: 20,
        state: 3,
        input: 2,
        hidden: 32,
        layers: 2,
    };
    assert_eq!(count_params(d, Method::Proposed), 10280);
    assert_eq!(count_params(d, Method::A3), 248320);
    assert!(count_params(d, Method::Proposed) < count_params(d, Method::A3));
}
