mod common;

use common::arb_formula_and_trajectory;
use proptest::prelude::*;
use stl2vec::diffgraph::{GradCheck, Graph, Tensor, Var};
use stl2vec::stl::{robustness_on_graph, Formula, RobustnessMode};

const BETAS: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

fn smooth_pair(values: &[f64], beta: f64) -> (f64, f64) {
    let mut g = Graph::new();
    let args: Vec<Var> = values.iter().map(|&v| g.scalar_leaf(v)).collect();
    let hi = g.smooth_max(&args, beta).unwrap();
    let lo = g.smooth_min(&args, beta).unwrap();
    (g.scalar(hi), g.scalar(lo))
}

/// `True` saturates at a huge constant, which drowns finite differences;
/// swap it for an ordinary predicate.
fn without_true(f: Formula) -> Formula {
    match f {
        Formula::True => Formula::pred(vec![0.5, -0.25], 0.1),
        Formula::Pred(_) => f,
        Formula::Not(c) => Formula::not(without_true(*c)),
        Formula::And(l, r) => Formula::and(without_true(*l), without_true(*r)),
        Formula::Or(l, r) => Formula::or(without_true(*l), without_true(*r)),
        Formula::Eventually(i, c) => Formula::eventually(i, without_true(*c)),
        Formula::Always(i, c) => Formula::always(i, without_true(*c)),
        Formula::Until(i, l, r) => Formula::until(i, without_true(*l), without_true(*r)),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn smooth_extrema_are_bounded(values in prop::collection::vec(-100.0f64..100.0, 1..40)) {
        let m = values.len() as f64;
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        for beta in BETAS {
            let (hi, lo) = smooth_pair(&values, beta);
            prop_assert!(max <= hi && hi <= max + m.ln() / beta, "beta {}: {} vs {}", beta, hi, max);
            prop_assert!(min - m.ln() / beta <= lo && lo <= min, "beta {}: {} vs {}", beta, lo, min);
        }
    }

    #[test]
    fn smooth_error_shrinks_with_beta(values in prop::collection::vec(-10.0f64..10.0, 1..40)) {
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let mut last = (f64::INFINITY, f64::INFINITY);
        for beta in BETAS {
            let (hi, lo) = smooth_pair(&values, beta);
            let err = (hi - max, min - lo);
            prop_assert!(err.0 <= last.0 && err.1 <= last.1);
            last = err;
        }
    }

    #[test]
    fn smooth_extrema_are_permutation_invariant(
        values in prop::collection::vec(-5.0f64..5.0, 2..12),
        beta in 0.5f64..50.0,
    ) {
        let mut rev = values.clone();
        rev.reverse();
        let (a, b) = (smooth_pair(&values, beta), smooth_pair(&rev, beta));
        prop_assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    }

    #[test]
    fn tape_is_deterministic((f, x) in arb_formula_and_trajectory(2)) {
        let f = without_true(f);
        let run = || {
            let mut g = Graph::new();
            let states: Vec<Var> = x.states().iter().map(|s| g.leaf(Tensor::column(s.clone()))).collect();
            let out = robustness_on_graph(&mut g, &f, &states, 0, RobustnessMode::Smooth { beta: 3.0 }).unwrap();
            let grads = g.backward(out).unwrap();
            let flat: Vec<f64> = states.iter().flat_map(|&s| grads.wrt(s).data().to_vec()).collect();
            (g.scalar(out), flat)
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(a.0.to_bits(), b.0.to_bits());
        prop_assert_eq!(a.1, b.1);
    }

    #[test]
    fn smooth_robustness_gradient_matches_finite_differences((f, x) in arb_formula_and_trajectory(2)) {
        let f = without_true(f);
        let params: Vec<Tensor> = x.states().iter().map(|s| Tensor::column(s.clone())).collect();
        let err = GradCheck::default()
            .run(
                |g, leaves| {
                    robustness_on_graph(g, &f, leaves, 0, RobustnessMode::Smooth { beta: 2.0 })
                        .map_err(|e| match e {
                            stl2vec::stl::StlError::Graph(e) => e,
                            other => panic!("{other}"),
                        })
                },
                &params,
            )
            .unwrap();
        prop_assert!(err < 1e-4, "relative error {}", err);
    }

    #[test]
    fn exact_tape_matches_direct_evaluation((f, x) in arb_formula_and_trajectory(3)) {
        let mut g = Graph::new();
        let states: Vec<Var> = x.states().iter().map(|s| g.leaf(Tensor::column(s.clone()))).collect();
        let out = robustness_on_graph(&mut g, &f, &states, 0, RobustnessMode::Exact).unwrap();
        prop_assert_eq!(g.scalar(out).to_bits(), stl2vec::stl::robustness(&f, &x, 0).unwrap().to_bits());
    }
}
