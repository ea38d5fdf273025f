use std::collections::HashMap;

use crate::diffgraph::{Graph, GraphError, Tensor, Var};

use super::formula::{Formula, TRUE_ROBUSTNESS};
use super::semantics::check_evaluable;
use super::StlError;

/// How min/max are realized when robustness is built on the tape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RobustnessMode {
    /// Exact extrema with subgradients routed to the first extremal argument.
    Exact,
    /// Log-sum-exp extrema with scale `beta > 0`.
    Smooth { beta: f64 },
}

impl RobustnessMode {
    pub fn smooth(beta: f64) -> Result<Self, StlError> {
        if beta > 0.0 && beta.is_finite() {
            Ok(RobustnessMode::Smooth { beta })
        } else {
            Err(StlError::Graph(GraphError::InvalidBeta(beta)))
        }
    }

    fn max(self, g: &mut Graph, args: &[Var]) -> Result<Var, GraphError> {
        if args.len() == 1 {
            return Ok(args[0]);
        }
        match self {
            RobustnessMode::Exact => g.hard_max(args),
            RobustnessMode::Smooth { beta } => g.smooth_max(args, beta),
        }
    }

    fn min(self, g: &mut Graph, args: &[Var]) -> Result<Var, GraphError> {
        if args.len() == 1 {
            return Ok(args[0]);
        }
        match self {
            RobustnessMode::Exact => g.hard_min(args),
            RobustnessMode::Smooth { beta } => g.smooth_min(args, beta),
        }
    }
}

struct Builder<'a> {
    graph: &'a mut Graph,
    states: &'a [Var],
    mode: RobustnessMode,
    memo: HashMap<(*const Formula, usize), Var>,
}

impl Builder<'_> {
    fn build(&mut self, f: &Formula, t: usize) -> Result<Var, GraphError> {
        let key = (f as *const Formula, t);
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let out = match f {
            Formula::True => self.graph.constant(Tensor::scalar(TRUE_ROBUSTNESS)),
            Formula::Pred(p) => self.graph.linear_form(self.states[t], p.coeffs(), p.offset()),
            Formula::Not(c) => {
                let v = self.build(c, t)?;
                self.graph.neg(v)
            }
            Formula::And(l, r) => {
                let args = [self.build(l, t)?, self.build(r, t)?];
                self.mode.min(self.graph, &args)?
            }
            Formula::Or(l, r) => {
                let args = [self.build(l, t)?, self.build(r, t)?];
                self.mode.max(self.graph, &args)?
            }
            Formula::Eventually(i, c) => {
                let args = (t + i.start()..=t + i.end())
                    .map(|t1| self.build(c, t1))
                    .collect::<Result<Vec<_>, _>>()?;
                self.mode.max(self.graph, &args)?
            }
            Formula::Always(i, c) => {
                let args = (t + i.start()..=t + i.end())
                    .map(|t1| self.build(c, t1))
                    .collect::<Result<Vec<_>, _>>()?;
                self.mode.min(self.graph, &args)?
            }
            Formula::Until(i, l, r) => {
                let mut candidates = Vec::with_capacity(i.end() - i.start() + 1);
                for t1 in t + i.start()..=t + i.end() {
                    let guard_args = (t..=t1).map(|t2| self.build(l, t2)).collect::<Result<Vec<_>, _>>()?;
                    let guard = self.mode.min(self.graph, &guard_args)?;
                    let reach = self.build(r, t1)?;
                    candidates.push(self.mode.min(self.graph, &[reach, guard])?);
                }
                self.mode.max(self.graph, &candidates)?
            }
        };
        self.memo.insert(key, out);
        Ok(out)
    }
}

/// Builds `rho(f, x, t)` on the tape from per-step state nodes (`n x 1`
/// columns). With [`RobustnessMode::Exact`] the value equals
/// [`super::robustness`] bitwise.
pub fn robustness_on_graph(
    graph: &mut Graph,
    f: &Formula,
    states: &[Var],
    t: usize,
    mode: RobustnessMode,
) -> Result<Var, StlError> {
    let first = states.first().ok_or(StlError::EmptyTrajectory)?;
    let dim = graph.value(*first).len();
    check_evaluable(f, dim, states.len() - 1, t)?;
    let mut b = Builder {
        graph,
        states,
        mode,
        memo: HashMap::new(),
    };
    Ok(b.build(f, t)?)
}
