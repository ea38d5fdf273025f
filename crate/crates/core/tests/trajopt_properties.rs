mod common;

use common::arb_formula;
use proptest::prelude::*;
use stl2vec::dynamics::{simulate, DynamicsModel, Integrator, StateBox};
use stl2vec::stl::{robustness, Formula};
use stl2vec::trajopt::{optimize, OptConfig};

fn integrator(dim: usize) -> Integrator {
    Integrator::new(vec![-1.0; dim], vec![1.0; dim]).unwrap()
}

/// Formula over a short horizon paired with a horizon that covers it.
fn short_formula(dim: usize) -> impl Strategy<Value = (Formula, usize)> {
    arb_formula(dim)
        .prop_filter("horizon at most 3", |f| f.horizon() <= 3)
        .prop_flat_map(|f| {
            let h = f.horizon().max(1);
            (Just(f), h..=3usize)
        })
}

/// Best exact robustness over every control sequence drawn from `levels`
/// evenly spaced values in `[-1, 1]`.
fn grid_best(f: &Formula, x0: f64, horizon: usize, levels: usize) -> f64 {
    let d = integrator(1);
    let grid: Vec<f64> = (0..levels)
        .map(|k| -1.0 + 2.0 * k as f64 / (levels - 1) as f64)
        .collect();
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; horizon];
    loop {
        let controls: Vec<Vec<f64>> = idx.iter().map(|&k| vec![grid[k]]).collect();
        best = best.max(robustness(f, &simulate(&d, &[x0], &controls), 0).unwrap());
        let mut pos = 0;
        while pos < horizon {
            idx[pos] += 1;
            if idx[pos] < levels {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
        if pos == horizon {
            return best;
        }
    }
}

fn cfg(horizon: usize, seed: u64) -> OptConfig {
    OptConfig {
        horizon,
        max_iters: 300,
        lr: 0.1,
        restarts: 4,
        vicinity: 0.0,
        seed,
        ..OptConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn result_is_feasible_and_resimulates(
        (f, h) in short_formula(2),
        x0 in prop::collection::vec(0.0f64..0.7, 2),
        seed in 0u64..1000,
    ) {
        let d = integrator(2);
        let bounds = StateBox::new(vec![0.0; 2], vec![0.7; 2]).unwrap();
        let c = OptConfig { vicinity: 0.1, ..cfg(h, seed) };
        let r = optimize(&f, &x0, &d, Some(&bounds), &c).unwrap();
        prop_assert_eq!(r.controls.len(), h);
        for u in &r.controls {
            for (k, v) in u.iter().enumerate() {
                prop_assert!(d.input_lower()[k] <= *v && *v <= d.input_upper()[k]);
            }
        }
        let start = r.trajectory.state(0).to_vec();
        prop_assert!(r.restart == 0 && start == x0 || bounds.contains(&start));
        let again = simulate(&d, &start, &r.controls);
        for (a, b) in again.states().iter().zip(r.trajectory.states()) {
            for (p, q) in a.iter().zip(b) {
                prop_assert!((p - q).abs() <= 1e-12);
            }
        }
        prop_assert_eq!(r.robustness, robustness(&f, &r.trajectory, 0).unwrap());
    }

    #[test]
    fn never_worse_than_midpoint_controls(
        (f, h) in short_formula(2),
        x0 in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let d = integrator(2);
        let r = optimize(&f, &x0, &d, None, &cfg(h, 7)).unwrap();
        let mid = simulate(&d, &x0, &vec![vec![0.0, 0.0]; h]);
        prop_assert!(r.robustness >= robustness(&f, &mid, 0).unwrap());
    }

    #[test]
    fn close_to_grid_search((f, h) in short_formula(1), x0 in -1.0f64..1.0) {
        // Disjunctions make the landscape multimodal; a wide restart spread
        // lets some restart land in the basin of the global optimum.
        let c = OptConfig { restarts: 16, init_sigma: 2.0, ..cfg(h, 3) };
        let r = optimize(&f, &[x0], &integrator(1), None, &c).unwrap();
        let grid = grid_best(&f, x0, h, 21);
        prop_assert!(r.robustness >= grid - 0.05, "optimizer {} vs grid {} on {}", r.robustness, grid, f);
    }
}
