mod common;

use common::{arb_formula, arb_formula_and_trajectory, brute_holds, brute_rho};
use proptest::prelude::*;
use stl2vec::stl::{parse_with_dim, robustness, robustness_signal, satisfies, Formula, Interval};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn matches_brute_force((f, x) in arb_formula_and_trajectory(2)) {
        prop_assert!(f.depth() <= 4 && f.horizon() <= 10);
        for t in 0..=x.final_time() - f.horizon() {
            let got = robustness(&f, &x, t).unwrap();
            let want = brute_rho(&f, &x, t);
            prop_assert!((got - want).abs() <= 1e-12, "t={}: {} vs {}", t, got, want);
        }
    }

    #[test]
    fn sign_is_sound((f, x) in arb_formula_and_trajectory(2)) {
        let rho = robustness(&f, &x, 0).unwrap();
        let sat = satisfies(&f, &x).unwrap();
        prop_assert_eq!(sat, brute_holds(&f, &x, 0));
        if rho > 0.0 {
            prop_assert!(sat);
        }
        if rho < 0.0 {
            prop_assert!(!sat);
        }
    }

    #[test]
    fn negation_is_antisymmetric((f, x) in arb_formula_and_trajectory(2)) {
        let neg = Formula::not(f.clone());
        for t in 0..=x.final_time() - f.horizon() {
            prop_assert_eq!(robustness(&neg, &x, t).unwrap(), -robustness(&f, &x, t).unwrap());
        }
    }

    #[test]
    fn de_morgan_is_exact(
        (f, x) in arb_formula_and_trajectory(2),
        g in arb_formula(2),
    ) {
        prop_assume!(g.horizon() <= x.final_time());
        let lhs = Formula::not(Formula::and(f.clone(), g.clone()));
        let rhs = Formula::or(Formula::not(f), Formula::not(g));
        prop_assert_eq!(robustness(&lhs, &x, 0).unwrap(), robustness(&rhs, &x, 0).unwrap());
    }

    #[test]
    fn eventually_is_a_shifted_max(
        (f, x) in arb_formula_and_trajectory(1),
        a in 0usize..3,
        w in 0usize..3,
    ) {
        let g = Formula::eventually(Interval::new(a, a + w).unwrap(), f.clone());
        prop_assume!(g.horizon() <= x.final_time());
        let inner = robustness_signal(&f, &x).unwrap();
        let outer = robustness_signal(&g, &x).unwrap();
        for (t, v) in outer.iter().enumerate() {
            let want = (t + a..=t + a + w).map(|t1| inner[t1]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(*v, want);
        }
    }

    #[test]
    fn display_reparses(f in arb_formula(3)) {
        let text = f.to_string();
        let back = parse_with_dim(&text, 3).unwrap();
        prop_assert_eq!(back.to_string(), text);
        prop_assert_eq!(back.horizon(), f.horizon());
    }
}
