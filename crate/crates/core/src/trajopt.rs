//! Open-loop robustness maximization.
//!
//! Controls are parameterized as `u_t = squash(theta_t)` so every iterate is
//! feasible, and `theta` is updated by Adam ascent on the smooth robustness.
//! The reported iterate is the one with the best exact robustness seen over
//! all restarts and iterations.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::diffgraph::{Adam, AdamConfig, Graph, GraphError, Tensor, Var};
use crate::dynamics::{simulate, squash, squash_graph, DynamicsModel, StateBox};
use crate::seeding::{task_rng, TaskRng};
use crate::stl::{robustness, robustness_on_graph, Formula, RobustnessMode, StlError, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptError {
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error("initial state has length {found}, system has {expected} states")]
    Dimension { expected: usize, found: usize },
    #[error("all {restarts} restarts hit non-finite values")]
    AllRestartsFailed { restarts: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptConfig {
    /// Horizon `T`; controls `u_0 .. u_{T-1}`.
    pub horizon: usize,
    pub beta: f64,
    pub max_iters: usize,
    pub lr: f64,
    pub restarts: usize,
    /// Radius for resampling the initial state on restarts after the first.
    pub vicinity: f64,
    /// Standard deviation of the random `theta` init on restarts after the first.
    pub init_sigma: f64,
    pub seed: u64,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            horizon: 20,
            beta: 10.0,
            max_iters: 300,
            lr: 0.05,
            restarts: 3,
            vicinity: 0.1,
            init_sigma: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub controls: Vec<Vec<f64>>,
    pub trajectory: Trajectory,
    pub robustness: f64,
    /// Smooth robustness of the final iterate of the winning restart.
    pub smooth_robustness: f64,
    pub iterations: usize,
    pub restart: usize,
}

impl OptResult {
    pub fn success(&self) -> bool {
        self.robustness > 0.0
    }
}

/// Uniform sample from the Euclidean ball of radius `eps` around `x0`,
/// clipped to `bounds` when given.
pub fn resample_vicinity<R: Rng + ?Sized>(x0: &[f64], eps: f64, bounds: Option<&StateBox>, rng: &mut R) -> Vec<f64> {
    if eps <= 0.0 {
        return x0.to_vec();
    }
    let n = x0.len();
    let dir: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    let radius = eps * rng.random::<f64>().powf(1.0 / n as f64);
    let mut out: Vec<f64> = if norm > 0.0 {
        x0.iter().zip(&dir).map(|(x, d)| x + radius * d / norm).collect()
    } else {
        x0.to_vec()
    };
    if let Some(b) = bounds {
        b.clip(&mut out);
    }
    out
}

fn controls_from(theta: &[Tensor], lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    theta
        .iter()
        .map(|th| {
            th.data()
                .iter()
                .enumerate()
                .map(|(k, &v)| squash(v, lo[k], hi[k]))
                .collect()
        })
        .collect()
}

struct Best {
    rho: f64,
    controls: Vec<Vec<f64>>,
    trajectory: Trajectory,
    iteration: usize,
}

struct RestartOutcome {
    best: Best,
    final_smooth: f64,
}

fn smooth_objective<D: DynamicsModel + ?Sized>(
    g: &mut Graph,
    f: &Formula,
    dyn_: &D,
    x0: &[f64],
    theta: &[Var],
    beta: f64,
) -> Result<Var, StlError> {
    let (lo, hi) = (dyn_.input_lower(), dyn_.input_upper());
    let mut states = Vec::with_capacity(theta.len() + 1);
    states.push(g.constant(Tensor::column(x0.to_vec())));
    for &th in theta {
        let u = squash_graph(g, th, lo, hi);
        let next = dyn_.step_graph(g, *states.last().unwrap(), u);
        states.push(next);
    }
    robustness_on_graph(g, f, &states, 0, RobustnessMode::Smooth { beta })
}

fn run_restart<D: DynamicsModel + ?Sized>(
    f: &Formula,
    dyn_: &D,
    x0: &[f64],
    mut theta: Vec<Tensor>,
    cfg: &OptConfig,
) -> Result<RestartOutcome, OptError> {
    let (lo, hi) = (dyn_.input_lower().to_vec(), dyn_.input_upper().to_vec());
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.lr), &theta);
    let mut best: Option<Best> = None;
    let mut final_smooth = f64::NAN;
    for iter in 0..=cfg.max_iters {
        let controls = controls_from(&theta, &lo, &hi);
        let traj = simulate(dyn_, x0, &controls);
        let rho = robustness(f, &traj, 0)?;
        if best.as_ref().is_none_or(|b| rho > b.rho) {
            best = Some(Best {
                rho,
                controls,
                trajectory: traj,
                iteration: iter,
            });
        }
        if iter == cfg.max_iters {
            break;
        }
        let mut g = Graph::new();
        let vars: Vec<Var> = theta.iter().map(|t| g.leaf(t.clone())).collect();
        let obj = smooth_objective(&mut g, f, dyn_, x0, &vars, cfg.beta)?;
        final_smooth = g.scalar(obj);
        let grads = match g.backward(obj) {
            Ok(gr) => gr,
            Err(GraphError::NonFinite { .. }) | Err(GraphError::NonFiniteGradient { .. }) => break,
            Err(e) => return Err(StlError::Graph(e).into()),
        };
        // Adam minimizes; ascend by feeding the negated gradient.
        let neg: Vec<Tensor> = vars.iter().map(|&v| grads.wrt(v).map(|d| -d)).collect();
        adam.step(&mut theta, &neg).expect("parameter shapes are fixed");
    }
    let best = best.expect("at least one iterate is evaluated");
    if !best.rho.is_finite() {
        return Err(OptError::AllRestartsFailed { restarts: 1 });
    }
    Ok(RestartOutcome { best, final_smooth })
}

/// Maximizes `rho(f, x, 0)` over bounded control sequences starting at `x0`.
///
/// Restart 0 starts from `theta = 0` (mid-range controls) at `x0`; later
/// restarts draw `theta ~ N(0, init_sigma^2)` and an initial state from the
/// `vicinity` ball around `x0`, clipped to `x0_box`.
pub fn optimize<D: DynamicsModel + ?Sized>(
    f: &Formula,
    x0: &[f64],
    dyn_: &D,
    x0_box: Option<&StateBox>,
    cfg: &OptConfig,
) -> Result<OptResult, OptError> {
    let (n, m) = (dyn_.state_dim(), dyn_.input_dim());
    if x0.len() != n {
        return Err(OptError::Dimension {
            expected: n,
            found: x0.len(),
        });
    }
    f.check_dim(n)?;
    let needed = f.horizon();
    if needed > cfg.horizon {
        return Err(StlError::HorizonExceedsTrajectory {
            needed,
            available: cfg.horizon,
        }
        .into());
    }
    let midpoint = vec![Tensor::zeros(m, 1); cfg.horizon];
    if matches!(f, Formula::True) {
        let controls = controls_from(&midpoint, dyn_.input_lower(), dyn_.input_upper());
        let trajectory = simulate(dyn_, x0, &controls);
        let rho = robustness(f, &trajectory, 0)?;
        return Ok(OptResult {
            controls,
            trajectory,
            robustness: rho,
            smooth_robustness: rho,
            iterations: 0,
            restart: 0,
        });
    }

    let mut rng: TaskRng = task_rng(cfg.seed, &[]);
    let mut winner: Option<(usize, RestartOutcome)> = None;
    for r in 0..cfg.restarts.max(1) {
        let (start, theta) = if r == 0 {
            (x0.to_vec(), midpoint.clone())
        } else {
            let start = resample_vicinity(x0, cfg.vicinity, x0_box, &mut rng);
            let theta = (0..cfg.horizon)
                .map(|_| {
                    let v = (0..m)
                        .map(|_| cfg.init_sigma * rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    Tensor::column(v)
                })
                .collect();
            (start, theta)
        };
        let outcome = match run_restart(f, dyn_, &start, theta, cfg) {
            Ok(o) => o,
            Err(OptError::AllRestartsFailed { .. }) => {
                log::warn!("restart {r} produced no finite iterate");
                continue;
            }
            Err(e) => return Err(e),
        };
        if winner.as_ref().is_none_or(|(_, w)| outcome.best.rho > w.best.rho) {
            winner = Some((r, outcome));
        }
    }
    let (restart, w) = winner.ok_or(OptError::AllRestartsFailed {
        restarts: cfg.restarts.max(1),
    })?;
    Ok(OptResult {
        controls: w.best.controls,
        trajectory: w.best.trajectory,
        robustness: w.best.rho,
        smooth_robustness: w.final_smooth,
        iterations: w.best.iteration,
        restart,
    })
}
