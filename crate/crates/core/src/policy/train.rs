use std::time::Instant;

use rayon::prelude::*;

use crate::diffgraph::{Adam, AdamConfig, Graph, Var};
use crate::dynamics::{DynamicsModel, StateBox};
use crate::seeding::{derive_seed, task_rng, STREAM_EVAL, STREAM_TRAIN};
use crate::stl::{robustness, robustness_on_graph, Formula, RobustnessMode, StlError};

use super::{make_batches, LstmPolicy, PolicyError, SpecEncoding};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Specs per batch, `N_b`.
    pub batch_size: usize,
    /// Initial states per batch, `L`.
    pub init_states: usize,
    pub lr: f64,
    pub mode: RobustnessMode,
    pub seed: u64,
    /// Evaluate every this many epochs (and after the last); 0 only
    /// evaluates before and after training.
    pub eval_every: usize,
    pub eval_samples: usize,
    /// Rollout length `T`.
    pub horizon: usize,
    pub hidden: usize,
    pub layers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batch_size: 8,
            init_states: 3,
            lr: 0.01,
            mode: RobustnessMode::Exact,
            seed: 0,
            eval_every: 10,
            eval_samples: 30,
            horizon: 20,
            hidden: 32,
            layers: 2,
        }
    }
}

/// Mean exact robustness of one evaluation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    /// Epochs completed when the sweep ran.
    pub epoch: usize,
    pub wall_seconds: f64,
    pub mean: f64,
    pub per_spec: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub evals: Vec<EvalRecord>,
    /// Mean batch loss of every epoch.
    pub losses: Vec<f64>,
}

impl TrainingLog {
    /// First evaluated epoch whose mean robustness is positive.
    pub fn first_positive_epoch(&self) -> Option<usize> {
        self.evals.iter().find(|r| r.mean > 0.0).map(|r| r.epoch)
    }

    pub fn last(&self) -> Option<&EvalRecord> {
        self.evals.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Training {
    pub policy: LstmPolicy,
    pub log: TrainingLog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneByOneTraining {
    pub policies: Vec<LstmPolicy>,
    /// Per-spec columns come from each spec's own controller; wall time is
    /// summed over controllers.
    pub log: TrainingLog,
}

/// What drives the closed loop for spec `i`.
#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    Shared {
        policy: &'a LstmPolicy,
        encoding: &'a SpecEncoding,
    },
    PerSpec(&'a [LstmPolicy]),
}

impl Controller<'_> {
    /// The policy driving spec `i` and its encoding input.
    pub fn for_spec(&self, i: usize) -> (&LstmPolicy, Vec<f64>) {
        match *self {
            Controller::Shared { policy, encoding } => (policy, encoding.encode(i)),
            Controller::PerSpec(ps) => (&ps[i], Vec::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub per_spec: Vec<f64>,
    pub mean: f64,
}

/// `n` initial states from the evaluation stream of `seed`.
pub fn sample_initial_states(sampler: &StateBox, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = task_rng(seed, &[STREAM_EVAL]);
    (0..n).map(|_| sampler.sample(&mut rng)).collect()
}

/// Mean exact robustness per spec over `states`, and the grand mean.
pub fn evaluate<D: DynamicsModel + ?Sized>(
    ctrl: Controller<'_>,
    specs: &[Formula],
    dyn_: &D,
    states: &[Vec<f64>],
    horizon: usize,
) -> Result<EvalResult, PolicyError> {
    if states.is_empty() {
        return Err(PolicyError::NoInitialStates);
    }
    if let Controller::PerSpec(ps) = ctrl {
        if ps.len() != specs.len() {
            return Err(PolicyError::PolicyCount {
                policies: ps.len(),
                specs: specs.len(),
            });
        }
    }
    let per_spec = specs
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let (policy, z) = ctrl.for_spec(i);
            let mut total = 0.0;
            for x0 in states {
                let (traj, _) = policy.rollout(dyn_, x0, &z, horizon)?;
                total += robustness(f, &traj, 0)?;
            }
            Ok(total / states.len() as f64)
        })
        .collect::<Result<Vec<f64>, PolicyError>>()?;
    let mean = per_spec.iter().sum::<f64>() / per_spec.len() as f64;
    Ok(EvalResult { per_spec, mean })
}

/// `-(1 / (|batch| L)) sum_i sum_j rho_i(rollout(x0_j, z_i))` on the tape.
#[allow(clippy::too_many_arguments)]
pub fn batch_loss_graph<D: DynamicsModel + ?Sized>(
    g: &mut Graph,
    params: &[Var],
    policy: &LstmPolicy,
    specs: &[Formula],
    encoding: &SpecEncoding,
    dyn_: &D,
    batch: &[usize],
    x0s: &[Vec<f64>],
    horizon: usize,
    mode: RobustnessMode,
) -> Result<Var, PolicyError> {
    let mut terms = Vec::with_capacity(batch.len() * x0s.len());
    for &i in batch {
        let z = encoding.encode(i);
        for x0 in x0s {
            let states = policy.rollout_graph(g, params, dyn_, x0, &z, horizon)?;
            terms.push(robustness_on_graph(g, &specs[i], &states, 0, mode)?);
        }
    }
    let mean = g.mean(&terms)?;
    Ok(g.neg(mean))
}

fn validate<D: DynamicsModel + ?Sized>(
    specs: &[Formula],
    encoding: &SpecEncoding,
    dyn_: &D,
    sampler: &StateBox,
    cfg: &TrainConfig,
) -> Result<(), PolicyError> {
    let m = specs.len();
    if cfg.batch_size == 0 || cfg.batch_size > m {
        return Err(PolicyError::BatchSize { nb: cfg.batch_size, m });
    }
    if cfg.init_states == 0 || cfg.eval_samples == 0 {
        return Err(PolicyError::NoInitialStates);
    }
    if let Some(k) = encoding.num_specs() {
        if k != m {
            return Err(PolicyError::EncodingSize { expected: m, found: k });
        }
    }
    if sampler.dim() != dyn_.state_dim() {
        return Err(PolicyError::Dimension {
            expected: dyn_.state_dim(),
            found: sampler.dim(),
        });
    }
    for f in specs {
        f.check_dim(dyn_.state_dim())?;
        if f.horizon() > cfg.horizon {
            return Err(StlError::HorizonExceedsTrajectory {
                needed: f.horizon(),
                available: cfg.horizon,
            }
            .into());
        }
    }
    Ok(())
}

fn run<D: DynamicsModel + ?Sized>(
    specs: &[Formula],
    encoding: &SpecEncoding,
    dyn_: &D,
    sampler: &StateBox,
    cfg: &TrainConfig,
    eval_states: &[Vec<f64>],
) -> Result<Training, PolicyError> {
    let start = Instant::now();
    let mut policy = LstmPolicy::new(
        dyn_.state_dim(),
        encoding.dim(),
        cfg.hidden,
        cfg.layers,
        dyn_.input_lower().to_vec(),
        dyn_.input_upper().to_vec(),
        cfg.seed,
    )?;
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.lr), policy.params());
    let mut log = TrainingLog::default();
    let record = |policy: &LstmPolicy, epoch: usize, log: &mut TrainingLog| -> Result<(), PolicyError> {
        let ctrl = Controller::Shared { policy, encoding };
        let r = evaluate(ctrl, specs, dyn_, eval_states, cfg.horizon)?;
        log.evals.push(EvalRecord {
            epoch,
            wall_seconds: start.elapsed().as_secs_f64(),
            mean: r.mean,
            per_spec: r.per_spec,
        });
        Ok(())
    };
    record(&policy, 0, &mut log)?;
    for epoch in 1..=cfg.epochs {
        let mut rng = task_rng(cfg.seed, &[STREAM_TRAIN, epoch as u64]);
        let batches = make_batches(specs.len(), cfg.batch_size, &mut rng)?;
        let mut epoch_loss = 0.0;
        for (b, batch) in batches.iter().enumerate() {
            let x0s: Vec<Vec<f64>> = (0..cfg.init_states).map(|_| sampler.sample(&mut rng)).collect();
            let mut g = Graph::new();
            let vars: Vec<Var> = policy.params().iter().map(|t| g.leaf(t.clone())).collect();
            let loss = batch_loss_graph(
                &mut g,
                &vars,
                &policy,
                specs,
                encoding,
                dyn_,
                batch,
                &x0s,
                cfg.horizon,
                cfg.mode,
            )?;
            let value = g.scalar(loss);
            let bad = |node| PolicyError::NonFinite { epoch, batch: b, node };
            if !value.is_finite() {
                return Err(bad(g.first_nonfinite()));
            }
            let grads = g.backward(loss).map_err(|_| bad(g.first_nonfinite()))?;
            let grads: Vec<_> = vars.iter().map(|&v| grads.wrt(v).clone()).collect();
            adam.step(policy.params_mut(), &grads)?;
            epoch_loss += value;
        }
        log.losses.push(epoch_loss / batches.len() as f64);
        if (cfg.eval_every > 0 && epoch % cfg.eval_every == 0) || epoch == cfg.epochs {
            record(&policy, epoch, &mut log)?;
        }
    }
    Ok(Training { policy, log })
}

/// Trains one controller shared by all `specs`, conditioned on `encoding`.
/// Evaluation uses exact robustness on a fixed set of initial states drawn
/// from a stream separate from training.
pub fn train<D: DynamicsModel + ?Sized>(
    specs: &[Formula],
    encoding: &SpecEncoding,
    dyn_: &D,
    sampler: &StateBox,
    cfg: &TrainConfig,
) -> Result<Training, PolicyError> {
    validate(specs, encoding, dyn_, sampler, cfg)?;
    let eval_states = sample_initial_states(sampler, cfg.eval_samples, cfg.seed);
    run(specs, encoding, dyn_, sampler, cfg, &eval_states)
}

/// Independent controller per spec, without an encoding input. Spec `i`
/// is trained like [`train`] on that spec alone with batch size 1 and seed
/// `derive_seed(cfg.seed, &[i])`; all controllers share the evaluation states
/// of `cfg.seed`.
pub fn train_one_by_one<D: DynamicsModel + ?Sized>(
    specs: &[Formula],
    dyn_: &D,
    sampler: &StateBox,
    cfg: &TrainConfig,
) -> Result<OneByOneTraining, PolicyError> {
    let single = TrainConfig {
        batch_size: 1,
        ..cfg.clone()
    };
    for f in specs {
        validate(std::slice::from_ref(f), &SpecEncoding::None, dyn_, sampler, &single)?;
    }
    if specs.is_empty() {
        return Err(PolicyError::BatchSize { nb: 1, m: 0 });
    }
    let eval_states = sample_initial_states(sampler, cfg.eval_samples, cfg.seed);
    let runs = specs
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let c = TrainConfig {
                seed: derive_seed(cfg.seed, &[i as u64]),
                ..single.clone()
            };
            run(
                std::slice::from_ref(f),
                &SpecEncoding::None,
                dyn_,
                sampler,
                &c,
                &eval_states,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    let m = specs.len() as f64;
    let mut log = TrainingLog::default();
    for (k, first) in runs[0].log.evals.iter().enumerate() {
        let per_spec: Vec<f64> = runs.iter().map(|r| r.log.evals[k].mean).collect();
        log.evals.push(EvalRecord {
            epoch: first.epoch,
            wall_seconds: runs.iter().map(|r| r.log.evals[k].wall_seconds).sum(),
            mean: per_spec.iter().sum::<f64>() / m,
            per_spec,
        });
    }
    log.losses = (0..cfg.epochs)
        .map(|e| runs.iter().map(|r| r.log.losses[e]).sum::<f64>() / m)
        .collect();
    let policies = runs.into_iter().map(|r| r.policy).collect();
    Ok(OneByOneTraining { policies, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffgraph::GradCheck;
    use crate::dynamics::Integrator;
    use crate::stl::{Interval, LinearPredicate};

    fn integrator() -> (Integrator, StateBox) {
        (
            Integrator::new(vec![-1.0], vec![1.0]).unwrap(),
            StateBox::new(vec![0.0], vec![0.5]).unwrap(),
        )
    }

    fn reach(c: f64) -> Formula {
        Formula::eventually(
            Interval::new(0, 5).unwrap(),
            Formula::Pred(LinearPredicate::new(vec![1.0], -c)),
        )
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 200,
            batch_size: 1,
            init_states: 3,
            lr: 0.02,
            eval_every: 20,
            eval_samples: 10,
            horizon: 6,
            hidden: 8,
            layers: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn satisfied_spec_gives_negative_initial_loss() {
        let (d, x0) = integrator();
        let wide = Formula::always(
            Interval::new(0, 6).unwrap(),
            Formula::and(
                Formula::Pred(LinearPredicate::new(vec![1.0], 100.0)),
                Formula::Pred(LinearPredicate::new(vec![-1.0], 100.0)),
            ),
        );
        let cfg = TrainConfig {
            epochs: 1,
            ..small_cfg()
        };
        let t = train(&[wide], &SpecEncoding::None, &d, &x0, &cfg).unwrap();
        assert!(t.log.losses[0] < 0.0);
        assert!(t.log.evals[0].mean > 90.0);
    }

    #[test]
    fn learns_integrator_reach() {
        // With exact max the subgradient can sit on x_0, which no parameter
        // influences; the smooth objective always reaches later states.
        let (d, x0) = integrator();
        let cfg = TrainConfig {
            mode: RobustnessMode::Smooth { beta: 5.0 },
            ..small_cfg()
        };
        let t = train(&[reach(3.0)], &SpecEncoding::None, &d, &x0, &cfg).unwrap();
        let last = t.log.last().unwrap();
        assert_eq!(last.epoch, 200);
        assert!(last.mean > 0.0, "{:?}", t.log.evals);
    }

    #[test]
    fn zero_lr_changes_nothing() {
        let (d, x0) = integrator();
        let cfg = TrainConfig {
            epochs: 5,
            lr: 0.0,
            eval_every: 1,
            ..small_cfg()
        };
        let t = train(&[reach(3.0)], &SpecEncoding::None, &d, &x0, &cfg).unwrap();
        let init = LstmPolicy::new(1, 0, 8, 1, vec![-1.0], vec![1.0], cfg.seed).unwrap();
        assert_eq!(t.policy, init);
        assert!(t.log.evals.windows(2).all(|w| w[0].mean == w[1].mean));
    }

    #[test]
    fn one_by_one_matches_single_training_and_isolates_specs() {
        let (d, x0) = integrator();
        let cfg = TrainConfig {
            epochs: 6,
            eval_every: 3,
            ..small_cfg()
        };
        let specs = [reach(3.0), reach(-2.0)];
        let both = train_one_by_one(&specs, &d, &x0, &cfg).unwrap();
        let alone = train(
            &specs[..1],
            &SpecEncoding::None,
            &d,
            &x0,
            &TrainConfig {
                seed: derive_seed(cfg.seed, &[0]),
                ..cfg.clone()
            },
        )
        .unwrap();
        // Evaluation states differ (seed), but parameters must agree.
        assert_eq!(both.policies[0], alone.policy);
        let away = Formula::eventually(Interval::new(0, 5).unwrap(), Formula::pred(vec![-1.0], -3.0));
        let other = train_one_by_one(&[reach(3.0), away], &d, &x0, &cfg).unwrap();
        assert_eq!(other.policies[0], both.policies[0]);
        assert_ne!(other.policies[1], both.policies[1]);
        assert_eq!(both.policies[0].input_dim(), 1);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let (d, _) = integrator();
        let specs = [reach(0.8), reach(-0.3)];
        let enc = SpecEncoding::OneHot { specs: 2 };
        let p = LstmPolicy::new(1, 2, 5, 2, vec![-1.0], vec![1.0], 9).unwrap();
        let x0s = vec![vec![0.1], vec![0.35]];
        let mode = RobustnessMode::Smooth { beta: 2.0 };
        let coords: Vec<(usize, usize)> = (0..p.params().len()).map(|t| (t, 0)).collect();
        let err = GradCheck::default()
            .run_subset(
                |g, vars| {
                    batch_loss_graph(g, vars, &p, &specs, &enc, &d, &[0, 1], &x0s, 6, mode).map_err(|e| match e {
                        PolicyError::Stl(StlError::Graph(ge)) => ge,
                        other => panic!("{other}"),
                    })
                },
                p.params(),
                &coords,
            )
            .unwrap();
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn evaluation_lower_bound_and_grand_mean() {
        let (d, x0) = integrator();
        let p = LstmPolicy::zeros(1, 1, 4, 1, vec![-1.0], vec![1.0]).unwrap();
        let enc = SpecEncoding::Integer { specs: 2 };
        let states = sample_initial_states(&x0, 7, 3);
        // Zero policy holds the state still inside [0, 0.5].
        let specs = [reach(-1.0), reach(-2.0)];
        let r = evaluate(
            Controller::Shared {
                policy: &p,
                encoding: &enc,
            },
            &specs,
            &d,
            &states,
            6,
        )
        .unwrap();
        assert!(r.per_spec[0] >= 1.0 && r.per_spec[1] >= 2.0);
        assert_eq!(r.mean, (r.per_spec[0] + r.per_spec[1]) / 2.0);
        assert!(evaluate(
            Controller::Shared {
                policy: &p,
                encoding: &enc
            },
            &specs,
            &d,
            &[],
            6
        )
        .is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        let (d, x0) = integrator();
        let specs = [reach(1.0)];
        let enc = SpecEncoding::None;
        let bad = |c: TrainConfig| train(&specs, &enc, &d, &x0, &c).is_err();
        assert!(bad(TrainConfig {
            batch_size: 2,
            ..small_cfg()
        }));
        assert!(bad(TrainConfig {
            init_states: 0,
            ..small_cfg()
        }));
        assert!(bad(TrainConfig {
            horizon: 4,
            ..small_cfg()
        }));
        assert!(train(&specs, &SpecEncoding::OneHot { specs: 3 }, &d, &x0, &small_cfg()).is_err());
    }
}
