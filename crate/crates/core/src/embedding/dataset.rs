use rayon::prelude::*;

use crate::dynamics::{DynamicsModel, StateBox};
use crate::seeding::{derive_seed, task_rng, STREAM_DATASET};
use crate::stl::{robustness, StlError, Trajectory};
use crate::trajopt::{optimize, OptConfig, OptError};

use super::{EmbeddingError, SpecSet};

/// One skip-gram training pair: a center specification and `P` context
/// specifications ordered by robustness closeness.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramRecord {
    pub center: usize,
    pub context: Vec<usize>,
    pub rho_center: f64,
    pub rho_context: Vec<f64>,
}

/// One solved optimization: the center spec, its optimal trajectory and the
/// robustness of that trajectory under every spec in the set.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSample {
    pub center: usize,
    pub iteration: usize,
    /// Sampled initial state; the trajectory may start elsewhere when a
    /// vicinity restart won.
    pub x0: Vec<f64>,
    pub controls: Vec<Vec<f64>>,
    pub trajectory: Trajectory,
    pub rho: Vec<f64>,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<SkipGramRecord>,
    pub samples: Vec<DatasetSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    /// Context size `P`.
    pub context: usize,
    /// Optimizations per spec, `N_ite`.
    pub iterations: usize,
    /// Maximum records emitted per (spec, iteration) when ties expand.
    pub tie_cap: usize,
    /// Drop samples whose optimum has non-positive robustness.
    pub discard_failures: bool,
    /// Optimizer settings; `seed` is overridden per task.
    pub opt: OptConfig,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            context: 2,
            iterations: 1,
            tie_cap: 20,
            discard_failures: false,
            opt: OptConfig::default(),
            seed: 0,
        }
    }
}

/// Groups of candidate indices sharing one robustness value, ordered by
/// distance to the center's value (then by smallest index).
fn closeness_groups(rho: &[f64], center: usize) -> Vec<(f64, Vec<usize>)> {
    let mut order: Vec<usize> = (0..rho.len()).filter(|&j| j != center).collect();
    order.sort_by(|&a, &b| rho[a].total_cmp(&rho[b]).then(a.cmp(&b)));
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for j in order {
        match groups.last_mut() {
            Some((_, members)) if rho[members[0]] == rho[j] => members.push(j),
            _ => groups.push(((rho[center] - rho[j]).abs(), vec![j])),
        }
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1[0].cmp(&b.1[0])));
    groups
}

/// Context selections for `center` given the robustness of one trajectory
/// under every spec.
///
/// Candidates with identical robustness form one group. The `p` closest
/// groups each contribute one member, and every combination of members is
/// emitted (lexicographically, at most `cap`). With fewer than `p` distinct
/// values the single flat ranking by `(distance, index)` is used.
pub fn select_contexts(rho: &[f64], center: usize, p: usize, cap: usize) -> Vec<Vec<usize>> {
    let groups = closeness_groups(rho, center);
    if groups.len() < p {
        let mut flat: Vec<usize> = (0..rho.len()).filter(|&j| j != center).collect();
        flat.sort_by(|&a, &b| {
            let (da, db) = ((rho[center] - rho[a]).abs(), (rho[center] - rho[b]).abs());
            da.total_cmp(&db).then(a.cmp(&b))
        });
        flat.truncate(p);
        return vec![flat];
    }
    let chosen = &groups[..p];
    let mut out = Vec::new();
    let mut pick = vec![0usize; p];
    'outer: while out.len() < cap.max(1) {
        out.push(pick.iter().zip(chosen).map(|(&k, g)| g.1[k]).collect());
        for pos in (0..p).rev() {
            pick[pos] += 1;
            if pick[pos] < chosen[pos].1.len() {
                continue 'outer;
            }
            pick[pos] = 0;
        }
        break;
    }
    out
}

/// Whether `context` is a valid selection for `center` under
/// [`select_contexts`]' rule: members come from distinct robustness values
/// whose distances are nondecreasing, and every value strictly closer than
/// the last member's is represented.
pub fn is_ranked_selection(rho: &[f64], center: usize, context: &[usize]) -> bool {
    let groups = closeness_groups(rho, center);
    let p = context.len();
    if context.iter().any(|&j| j == center || j >= rho.len()) {
        return false;
    }
    if groups.len() < p {
        let d = |j: usize| (rho[center] - rho[j]).abs();
        let worst = context.iter().map(|&j| d(j)).fold(f64::NEG_INFINITY, f64::max);
        let closer = (0..rho.len())
            .filter(|&j| j != center && d(j) < worst)
            .all(|j| context.contains(&j));
        let sorted = context.windows(2).all(|w| d(w[0]) <= d(w[1]));
        let distinct = (0..p).all(|a| (a + 1..p).all(|b| context[a] != context[b]));
        return closer && sorted && distinct;
    }
    let group_of = |j: usize| groups.iter().position(|g| g.1.contains(&j)).unwrap();
    let ids: Vec<usize> = context.iter().map(|&j| group_of(j)).collect();
    let dist: Vec<f64> = ids.iter().map(|&g| groups[g].0).collect();
    let distinct = (0..p).all(|a| (a + 1..p).all(|b| ids[a] != ids[b]));
    let sorted = dist.windows(2).all(|w| w[0] <= w[1]);
    let worst = dist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let closer = groups
        .iter()
        .enumerate()
        .filter(|(_, g)| g.0 < worst)
        .all(|(k, _)| ids.contains(&k));
    distinct && sorted && closer
}

fn records_for(sample: &DatasetSample, p: usize, cap: usize) -> Vec<SkipGramRecord> {
    select_contexts(&sample.rho, sample.center, p, cap)
        .into_iter()
        .map(|context| SkipGramRecord {
            center: sample.center,
            rho_center: sample.rho[sample.center],
            rho_context: context.iter().map(|&k| sample.rho[k]).collect(),
            context,
        })
        .collect()
}

fn solve_one<D: DynamicsModel + ?Sized>(
    specs: &SpecSet,
    dyn_: &D,
    sampler: &StateBox,
    cfg: &DatasetConfig,
    center: usize,
    iteration: usize,
) -> Result<Option<DatasetSample>, EmbeddingError> {
    let parts = [STREAM_DATASET, center as u64, iteration as u64];
    let mut rng = task_rng(cfg.seed, &parts);
    let x0 = sampler.sample(&mut rng);
    let opt_cfg = OptConfig {
        seed: derive_seed(cfg.seed, &[STREAM_DATASET, center as u64, iteration as u64, 1]),
        ..cfg.opt.clone()
    };
    let result = match optimize(specs.spec(center), &x0, dyn_, Some(sampler), &opt_cfg) {
        Ok(r) => r,
        Err(OptError::AllRestartsFailed { .. }) => {
            log::warn!("spec {center}, iteration {iteration}: optimizer failed, sample skipped");
            return Ok(None);
        }
        Err(e) => return Err(e.into()),
    };
    let rho = specs
        .specs()
        .iter()
        .map(|f| robustness(f, &result.trajectory, 0))
        .collect::<Result<Vec<_>, StlError>>()?;
    Ok(Some(DatasetSample {
        center,
        iteration,
        x0,
        success: result.success(),
        controls: result.controls,
        trajectory: result.trajectory,
        rho,
    }))
}

/// Builds skip-gram records from robustness closeness of optimal
/// trajectories. Tasks run in parallel; output order is (spec, iteration).
pub fn generate_dataset<D: DynamicsModel + ?Sized>(
    specs: &SpecSet,
    dyn_: &D,
    sampler: &StateBox,
    cfg: &DatasetConfig,
) -> Result<Dataset, EmbeddingError> {
    let m = specs.len();
    if cfg.context == 0 || cfg.context > m - 1 {
        return Err(EmbeddingError::ContextSize { p: cfg.context, m });
    }
    if cfg.iterations == 0 {
        return Err(EmbeddingError::NoIterations);
    }
    if sampler.dim() != dyn_.state_dim() {
        return Err(EmbeddingError::Dimension {
            expected: dyn_.state_dim(),
            found: sampler.dim(),
        });
    }
    for f in specs.specs() {
        f.check_dim(dyn_.state_dim())?;
        if f.horizon() > cfg.opt.horizon {
            return Err(StlError::HorizonExceedsTrajectory {
                needed: f.horizon(),
                available: cfg.opt.horizon,
            }
            .into());
        }
    }
    let tasks: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..cfg.iterations).map(move |l| (i, l))).collect();
    let solved = tasks
        .par_iter()
        .map(|&(i, l)| solve_one(specs, dyn_, sampler, cfg, i, l))
        .collect::<Result<Vec<_>, _>>()?;
    let samples: Vec<DatasetSample> = solved
        .into_iter()
        .flatten()
        .filter(|s| s.success || !cfg.discard_failures)
        .collect();
    let records = samples
        .iter()
        .flat_map(|s| records_for(s, cfg.context, cfg.tie_cap))
        .collect();
    Ok(Dataset { records, samples })
}
