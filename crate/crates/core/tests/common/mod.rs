//! Independent oracles and random generators shared by integration tests.
#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use stl2vec::stl::{Formula, Interval, Trajectory, TRUE_ROBUSTNESS};

/// Robustness by literal recursion: every max/min is taken over the
/// enumerated time indices, nothing is shared or cached.
pub fn brute_rho(f: &Formula, x: &Trajectory, t: usize) -> f64 {
    match f {
        Formula::True => TRUE_ROBUSTNESS,
        Formula::Pred(p) => {
            let s = x.state(t);
            p.coeffs().iter().zip(s).map(|(c, v)| c * v).sum::<f64>() + p.offset()
        }
        Formula::Not(c) => -brute_rho(c, x, t),
        Formula::And(l, r) => brute_rho(l, x, t).min(brute_rho(r, x, t)),
        Formula::Or(l, r) => brute_rho(l, x, t).max(brute_rho(r, x, t)),
        Formula::Eventually(i, c) => (t + i.start()..=t + i.end())
            .map(|t1| brute_rho(c, x, t1))
            .fold(f64::NEG_INFINITY, f64::max),
        Formula::Always(i, c) => (t + i.start()..=t + i.end())
            .map(|t1| brute_rho(c, x, t1))
            .fold(f64::INFINITY, f64::min),
        Formula::Until(i, l, r) => (t + i.start()..=t + i.end())
            .map(|t1| {
                let guard = (t..=t1).map(|t2| brute_rho(l, x, t2)).fold(f64::INFINITY, f64::min);
                brute_rho(r, x, t1).min(guard)
            })
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Qualitative satisfaction by literal recursion.
pub fn brute_holds(f: &Formula, x: &Trajectory, t: usize) -> bool {
    match f {
        Formula::True => true,
        Formula::Pred(p) => {
            let s = x.state(t);
            p.coeffs().iter().zip(s).map(|(c, v)| c * v).sum::<f64>() + p.offset() > 0.0
        }
        Formula::Not(c) => !brute_holds(c, x, t),
        Formula::And(l, r) => brute_holds(l, x, t) && brute_holds(r, x, t),
        Formula::Or(l, r) => brute_holds(l, x, t) || brute_holds(r, x, t),
        Formula::Eventually(i, c) => (t + i.start()..=t + i.end()).any(|t1| brute_holds(c, x, t1)),
        Formula::Always(i, c) => (t + i.start()..=t + i.end()).all(|t1| brute_holds(c, x, t1)),
        Formula::Until(i, l, r) => {
            (t + i.start()..=t + i.end()).any(|t1| brute_holds(r, x, t1) && (t..=t1).all(|t2| brute_holds(l, x, t2)))
        }
    }
}

/// Random formula with [`Formula::depth`] at most `depth` whose horizon fits
/// in `budget`. Each node draws its operator uniformly from the eight
/// constructors; nodes at the depth limit draw from the two leaves.
pub fn random_formula<R: Rng>(rng: &mut R, depth: usize, dim: usize, budget: usize) -> Formula {
    let op = if depth == 0 {
        rng.random_range(0..2)
    } else {
        rng.random_range(0..8)
    };
    let interval = |rng: &mut R| {
        let a = rng.random_range(0..=budget.min(3));
        let b = rng.random_range(a..=budget.min(a + 3));
        (Interval::new(a, b).unwrap(), budget - b)
    };
    match op {
        0 => Formula::pred(
            (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            rng.random_range(-1.0..1.0),
        ),
        1 => Formula::True,
        2 => Formula::not(random_formula(rng, depth - 1, dim, budget)),
        3 => Formula::and(
            random_formula(rng, depth - 1, dim, budget),
            random_formula(rng, depth - 1, dim, budget),
        ),
        4 => Formula::or(
            random_formula(rng, depth - 1, dim, budget),
            random_formula(rng, depth - 1, dim, budget),
        ),
        5 => {
            let (i, rest) = interval(rng);
            Formula::eventually(i, random_formula(rng, depth - 1, dim, rest))
        }
        6 => {
            let (i, rest) = interval(rng);
            Formula::always(i, random_formula(rng, depth - 1, dim, rest))
        }
        _ => {
            let (i, rest) = interval(rng);
            Formula::until(
                i,
                random_formula(rng, depth - 1, dim, rest),
                random_formula(rng, depth - 1, dim, rest),
            )
        }
    }
}

pub fn random_trajectory<R: Rng>(rng: &mut R, len: usize, dim: usize) -> Trajectory {
    Trajectory::new(
        (0..len)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect(),
    )
    .unwrap()
}

fn arb_interval() -> impl Strategy<Value = Interval> {
    (0usize..=2, 0usize..=1).prop_map(|(a, w)| Interval::new(a, a + w).unwrap())
}

/// Formulas over `dim` signals, depth at most 4, horizon at most 10.
pub fn arb_formula(dim: usize) -> impl Strategy<Value = Formula> {
    let pred = (prop::collection::vec(-1.0f64..1.0, dim), -1.0f64..1.0).prop_map(|(c, o)| Formula::pred(c, o));
    let leaf = prop_oneof![4 => pred, 1 => Just(Formula::True)];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (arb_interval(), inner.clone()).prop_map(|(i, f)| Formula::eventually(i, f)),
            (arb_interval(), inner.clone()).prop_map(|(i, f)| Formula::always(i, f)),
            (arb_interval(), inner.clone(), inner).prop_map(|(i, a, b)| Formula::until(i, a, b)),
        ]
    })
    .prop_filter("horizon at most 10", |f| f.horizon() <= 10)
}

/// A formula with a trajectory long enough to evaluate it at time 0.
pub fn arb_formula_and_trajectory(dim: usize) -> impl Strategy<Value = (Formula, Trajectory)> {
    arb_formula(dim).prop_flat_map(move |f| {
        let h = f.horizon();
        (h..=10usize)
            .prop_flat_map(move |t| prop::collection::vec(prop::collection::vec(-2.0f64..2.0, dim), t + 1))
            .prop_map(move |states| (f.clone(), Trajectory::new(states).unwrap()))
    })
}
