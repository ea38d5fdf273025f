//! Discrete-time control systems `x_{t+1} = f(x_t, u_t)` with box-bounded
//! inputs, evaluable both on plain vectors and on the autodiff tape.

use rand::Rng;
use thiserror::Error;

use crate::diffgraph::{Graph, Var};
use crate::stl::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("expected a vector of length {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("bound {index}: lower {lo} is not below upper {hi}")]
    Bounds { index: usize, lo: f64, hi: f64 },
}

pub trait DynamicsModel: Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn input_lower(&self) -> &[f64];
    fn input_upper(&self) -> &[f64];
    fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64>;
    /// Same map on the tape; `x` is `n x 1`, `u` is `m x 1`.
    fn step_graph(&self, g: &mut Graph, x: Var, u: Var) -> Var;
}

/// `lo + (hi - lo) / 2 * (tanh(theta) + 1)`, written so the scalar and tape
/// versions round identically.
pub fn squash(theta: f64, lo: f64, hi: f64) -> f64 {
    let half = (hi - lo) / 2.0;
    theta.tanh() * half + (lo + half)
}

pub fn squash_graph(g: &mut Graph, theta: Var, lo: &[f64], hi: &[f64]) -> Var {
    let half: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| (h - l) / 2.0).collect();
    let mid: Vec<f64> = lo.iter().zip(&half).map(|(l, s)| l + s).collect();
    let t = g.tanh(theta);
    g.affine(t, &half, &mid)
}

pub fn check_bounds(lo: &[f64], hi: &[f64]) -> Result<(), DynamicsError> {
    if lo.len() != hi.len() {
        return Err(DynamicsError::Dimension {
            expected: lo.len(),
            found: hi.len(),
        });
    }
    match lo.iter().zip(hi).position(|(l, h)| !(l < h)) {
        Some(index) => Err(DynamicsError::Bounds {
            index,
            lo: lo[index],
            hi: hi[index],
        }),
        None => Ok(()),
    }
}

/// Runs `controls` from `x0` and returns all `len + 1` states.
pub fn simulate<D: DynamicsModel + ?Sized>(dyn_: &D, x0: &[f64], controls: &[Vec<f64>]) -> Trajectory {
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(x0.to_vec());
    for u in controls {
        let next = dyn_.step(states.last().unwrap(), u);
        states.push(next);
    }
    Trajectory::new(states).expect("dynamics preserve the state dimension")
}

/// Axis-aligned box of initial states. Degenerate sides (`lo == hi`) pin a
/// coordinate, e.g. the initial heading.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl StateBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, DynamicsError> {
        if lo.len() != hi.len() {
            return Err(DynamicsError::Dimension {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if let Some(index) = lo.iter().zip(&hi).position(|(l, h)| !(l <= h)) {
            return Err(DynamicsError::Bounds {
                index,
                lo: lo[index],
                hi: hi[index],
            });
        }
        Ok(StateBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lo
    }

    pub fn upper(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| l <= v && v <= h)
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (v, (l, h)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*l, *h);
        }
    }

    /// Uniform sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| if l == h { l } else { rng.random_range(l..=h) })
            .collect()
    }
}

/// `x_{t+1} = x_t + u_t` in `n` dimensions with `u` in `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct Integrator {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Integrator {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, DynamicsError> {
        check_bounds(&lo, &hi)?;
        Ok(Integrator { lo, hi })
    }
}

impl DynamicsModel for Integrator {
    fn state_dim(&self) -> usize {
        self.lo.len()
    }

    fn input_dim(&self) -> usize {
        self.lo.len()
    }

    fn input_lower(&self) -> &[f64] {
        &self.lo
    }

    fn input_upper(&self) -> &[f64] {
        &self.hi
    }

    fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        x.iter().zip(u).map(|(a, b)| a + b).collect()
    }

    fn step_graph(&self, g: &mut Graph, x: Var, u: Var) -> Var {
        g.add(x, u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffgraph::Tensor;
    use crate::seeding::task_rng;

    #[test]
    fn squash_hits_midpoint_and_stays_inside() {
        assert_eq!(squash(0.0, -1.0, 3.0), 1.0);
        assert!(squash(5.0, 0.0, 1.0) < 1.0);
        let mut g = Graph::new();
        let th = g.leaf(Tensor::column(vec![0.3, -2.0]));
        let u = squash_graph(&mut g, th, &[0.0, -0.5], &[1.0, 0.5]);
        assert_eq!(g.value(u).data(), &[squash(0.3, 0.0, 1.0), squash(-2.0, -0.5, 0.5)]);
    }

    #[test]
    fn box_sampling_respects_bounds() {
        let b = StateBox::new(vec![0.0, 0.0, 0.0], vec![0.7, 0.7, 0.0]).unwrap();
        let mut rng = task_rng(1, &[]);
        for _ in 0..100 {
            let x = b.sample(&mut rng);
            assert!(b.contains(&x));
            assert_eq!(x[2], 0.0);
        }
        assert!(StateBox::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn integrator_simulation() {
        let d = Integrator::new(vec![-1.0], vec![1.0]).unwrap();
        let x = simulate(&d, &[0.0], &[vec![1.0], vec![0.5]]);
        assert_eq!(x.states(), &[vec![0.0], vec![1.0], vec![1.5]]);
        assert!(Integrator::new(vec![1.0], vec![1.0]).is_err());
    }
}
