use proptest::prelude::*;
use stl2vec::dynamics::{Integrator, StateBox};
use stl2vec::embedding::{
    cosine_similarity, generate_dataset, is_ranked_selection, nearest, one_hot, select_contexts, train_skipgram,
    DatasetConfig, EmbeddingModel, SkipGramConfig, SkipGramRecord, SpecSet,
};
use stl2vec::stl::parse_with_dim;
use stl2vec::trajopt::OptConfig;

/// The `p` smallest distances from the center's value to the distinct
/// values held by the other specs.
fn closest_distinct_distances(rho: &[f64], center: usize, p: usize) -> Vec<f64> {
    let mut values: Vec<f64> = (0..rho.len()).filter(|&j| j != center).map(|j| rho[j]).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut d: Vec<f64> = values.iter().map(|v| (rho[center] - v).abs()).collect();
    d.sort_by(f64::total_cmp);
    d.truncate(p);
    d
}

fn ties() -> impl Strategy<Value = (Vec<f64>, usize, usize)> {
    prop::collection::vec((0i32..5).prop_map(f64::from), 4..10).prop_flat_map(|rho| {
        let m = rho.len();
        (Just(rho), 0..m, 1..4usize)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn distinct_values_give_the_plain_ranking(
        rho in prop::collection::vec(-5.0f64..5.0, 3..12),
        center in 0usize..12,
        p in 1usize..4,
    ) {
        let center = center % rho.len();
        let p = p.min(rho.len() - 1);
        let out = select_contexts(&rho, center, p, 20);
        let mut order: Vec<usize> = (0..rho.len()).filter(|&j| j != center).collect();
        order.sort_by(|&a, &b| (rho[center] - rho[a]).abs().total_cmp(&(rho[center] - rho[b]).abs()));
        order.truncate(p);
        prop_assert_eq!(out, vec![order]);
    }

    #[test]
    fn tied_selections_cover_the_closest_values((rho, center, p) in ties()) {
        let distinct = closest_distinct_distances(&rho, center, p);
        let out = select_contexts(&rho, center, p, 1000);
        prop_assert!(!out.is_empty());
        for ctx in &out {
            prop_assert_eq!(ctx.len(), p);
            prop_assert!(is_ranked_selection(&rho, center, ctx));
            prop_assert!(!ctx.contains(&center));
            if distinct.len() >= p {
                let mut vals: Vec<f64> = ctx.iter().map(|&j| rho[j]).collect();
                vals.sort_by(f64::total_cmp);
                vals.dedup();
                prop_assert_eq!(vals.len(), p, "members share a value: {:?}", ctx);
                let mut d: Vec<f64> = ctx.iter().map(|&j| (rho[center] - rho[j]).abs()).collect();
                d.sort_by(f64::total_cmp);
                prop_assert_eq!(&d, &distinct);
            }
        }
        let mut uniq = out.clone();
        uniq.sort();
        uniq.dedup();
        prop_assert_eq!(uniq.len(), out.len());
    }

    #[test]
    fn tie_cap_truncates((rho, center, p) in ties(), cap in 1usize..4) {
        let all = select_contexts(&rho, center, p, 1000);
        let capped = select_contexts(&rho, center, p, cap);
        prop_assert_eq!(capped.len(), all.len().min(cap));
        prop_assert_eq!(&capped[..], &all[..capped.len()]);
    }

    #[test]
    fn nearest_agrees_with_brute_force(seed in 0u64..10_000, m in 3usize..12, n in 1usize..6) {
        let model = EmbeddingModel::random(m, n, seed);
        for i in 0..m {
            let mut want: Vec<(usize, f64)> = (0..m)
                .filter(|&j| j != i)
                .map(|j| {
                    let (a, b) = (model.w_in().row(i), model.w_in().row(j));
                    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    (j, dot / (norm(a) * norm(b)))
                })
                .collect();
            want.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let got = nearest(&model, i, m - 1).unwrap();
            prop_assert_eq!(got.len(), m - 1);
            for ((gj, gs), (wj, ws)) in got.iter().zip(&want) {
                prop_assert_eq!(gj, wj);
                prop_assert!((gs - ws).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_hot_is_a_bijection(m in 1usize..50) {
        let rows: Vec<Vec<f64>> = (0..m).map(|i| one_hot(i, m)).collect();
        for (i, r) in rows.iter().enumerate() {
            prop_assert_eq!(r.len(), m);
            prop_assert_eq!(r.iter().sum::<f64>(), 1.0);
            prop_assert_eq!(r[i], 1.0);
            for (j, s) in rows.iter().enumerate() {
                prop_assert_eq!(r == s, i == j);
            }
        }
    }

    #[test]
    fn cosine_is_scale_invariant(
        a in prop::collection::vec(-3.0f64..3.0, 4),
        b in prop::collection::vec(-3.0f64..3.0, 4),
        s in 0.1f64..10.0,
    ) {
        prop_assume!(a.iter().any(|x| x.abs() > 1e-3) && b.iter().any(|x| x.abs() > 1e-3));
        let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
        let c = cosine_similarity(&a, &b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c));
        prop_assert!((cosine_similarity(&scaled, &b).unwrap() - c).abs() < 1e-12);
    }
}

fn random_records(seed: u64, m: usize, count: usize) -> Vec<SkipGramRecord> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let center = rng.random_range(0..m);
            let context: Vec<usize> = (0..2).map(|_| (center + rng.random_range(1..m)) % m).collect();
            SkipGramRecord {
                center,
                context,
                rho_center: 0.0,
                rho_context: vec![0.0; 2],
            }
        })
        .collect()
}

#[test]
fn skipgram_loss_decreases() {
    for seed in 0..5 {
        let records = random_records(seed, 8, 40);
        let cfg = SkipGramConfig {
            dim: 4,
            epochs: 60,
            lr: 0.5,
            seed,
            ..SkipGramConfig::default()
        };
        let out = train_skipgram(&records, 8, &cfg).unwrap();
        assert_eq!(out.losses.len(), 61);
        let (first, last) = (out.losses[0], *out.losses.last().unwrap());
        assert!(last < first, "seed {seed}: {first} -> {last}");
        let model = EmbeddingModel::new(out.model.w_in().clone(), out.model.w_out().clone()).unwrap();
        assert!((model.loss(&records).unwrap() - last).abs() < 1e-12);
    }
}

#[test]
fn generated_records_are_ranked_selections() {
    let specs: Vec<_> = [
        "F[0,4] x1 >= 2",
        "F[0,4] x1 <= -2",
        "G[0,4] x1 >= -1",
        "F[0,2] x1 >= 1",
        "x1 >= 0",
    ]
    .iter()
    .map(|s| parse_with_dim(s, 1).unwrap())
    .collect();
    let set = SpecSet::unnamed(specs).unwrap();
    let dyn_ = Integrator::new(vec![-1.0], vec![1.0]).unwrap();
    let sampler = StateBox::new(vec![-0.5], vec![0.5]).unwrap();
    let cfg = DatasetConfig {
        context: 2,
        iterations: 3,
        opt: OptConfig {
            horizon: 5,
            max_iters: 100,
            ..OptConfig::default()
        },
        seed: 11,
        ..DatasetConfig::default()
    };
    let data = generate_dataset(&set, &dyn_, &sampler, &cfg).unwrap();
    assert_eq!(data.samples.len(), 15);
    assert!(data.records.len() >= 15);
    for r in &data.records {
        let sample = data
            .samples
            .iter()
            .find(|s| s.center == r.center && s.rho[r.center] == r.rho_center)
            .unwrap();
        assert!(is_ranked_selection(&sample.rho, r.center, &r.context));
        let want: Vec<f64> = r.context.iter().map(|&j| sample.rho[j]).collect();
        assert_eq!(r.rho_context, want);
        let d: Vec<f64> = r
            .context
            .iter()
            .map(|&j| (sample.rho[r.center] - sample.rho[j]).abs())
            .collect();
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
    }
    let again = generate_dataset(&set, &dyn_, &sampler, &cfg).unwrap();
    assert_eq!(data, again);
}
