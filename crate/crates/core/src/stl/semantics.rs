use super::formula::{Formula, TRUE_ROBUSTNESS};
use super::StlError;

/// Discrete-time state sequence `x_0 .. x_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(states: Vec<Vec<f64>>) -> Result<Self, StlError> {
        let first = states.first().ok_or(StlError::EmptyTrajectory)?;
        let dim = first.len();
        if let Some(bad) = states.iter().find(|s| s.len() != dim) {
            return Err(StlError::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Ok(Trajectory { states })
    }

    /// Scalar signal, one state per sample.
    pub fn from_scalars(values: &[f64]) -> Result<Self, StlError> {
        Self::new(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    /// Final time index `T`; the trajectory holds `T + 1` states.
    pub fn final_time(&self) -> usize {
        self.states.len() - 1
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t]
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }
}

pub(crate) fn check_evaluable(f: &Formula, dim: usize, final_time: usize, t: usize) -> Result<(), StlError> {
    f.check_dim(dim)?;
    let needed = t + f.horizon();
    if needed > final_time {
        return Err(StlError::HorizonExceedsTrajectory {
            needed,
            available: final_time,
        });
    }
    Ok(())
}

/// Robustness `rho(f, x, t)` for every `t` in `from..=to`.
///
/// Each subformula is evaluated once over the window it is needed on, so the
/// cost is linear in formula size times window width (times interval width for
/// temporal operators).
fn signal(f: &Formula, x: &Trajectory, from: usize, to: usize) -> Vec<f64> {
    match f {
        Formula::True => vec![TRUE_ROBUSTNESS; to - from + 1],
        Formula::Pred(p) => (from..=to).map(|t| p.eval(x.state(t))).collect(),
        Formula::Not(c) => signal(c, x, from, to).into_iter().map(|v| -v).collect(),
        Formula::And(l, r) => {
            let (a, b) = (signal(l, x, from, to), signal(r, x, from, to));
            a.iter().zip(&b).map(|(p, q)| p.min(*q)).collect()
        }
        Formula::Or(l, r) => {
            let (a, b) = (signal(l, x, from, to), signal(r, x, from, to));
            a.iter().zip(&b).map(|(p, q)| p.max(*q)).collect()
        }
        Formula::Eventually(i, c) | Formula::Always(i, c) => {
            let inner = signal(c, x, from + i.start(), to + i.end());
            let width = i.end() - i.start() + 1;
            let is_max = matches!(f, Formula::Eventually(..));
            (0..=to - from)
                .map(|k| {
                    let window = &inner[k..k + width];
                    if is_max {
                        window.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    } else {
                        window.iter().copied().fold(f64::INFINITY, f64::min)
                    }
                })
                .collect()
        }
        Formula::Until(i, l, r) => {
            let lhs = signal(l, x, from, to + i.end());
            let rhs = signal(r, x, from, to + i.end());
            (from..=to)
                .map(|t| {
                    let mut best = f64::NEG_INFINITY;
                    let mut guard = f64::INFINITY;
                    for t1 in t..=t + i.end() {
                        guard = guard.min(lhs[t1 - from]);
                        if t1 >= t + i.start() {
                            best = best.max(rhs[t1 - from].min(guard));
                        }
                    }
                    best
                })
                .collect()
        }
    }
}

/// Quantitative robustness of `f` on `x` at time `t`.
pub fn robustness(f: &Formula, x: &Trajectory, t: usize) -> Result<f64, StlError> {
    check_evaluable(f, x.dim(), x.final_time(), t)?;
    Ok(signal(f, x, t, t)[0])
}

/// Robustness at every time where it is defined, `0 ..= T - horizon(f)`.
pub fn robustness_signal(f: &Formula, x: &Trajectory) -> Result<Vec<f64>, StlError> {
    check_evaluable(f, x.dim(), x.final_time(), 0)?;
    Ok(signal(f, x, 0, x.final_time() - f.horizon()))
}

fn holds(f: &Formula, x: &Trajectory, t: usize) -> bool {
    match f {
        Formula::True => true,
        Formula::Pred(p) => p.eval(x.state(t)) > 0.0,
        Formula::Not(c) => !holds(c, x, t),
        Formula::And(l, r) => holds(l, x, t) && holds(r, x, t),
        Formula::Or(l, r) => holds(l, x, t) || holds(r, x, t),
        Formula::Eventually(i, c) => (t + i.start()..=t + i.end()).any(|t1| holds(c, x, t1)),
        Formula::Always(i, c) => (t + i.start()..=t + i.end()).all(|t1| holds(c, x, t1)),
        Formula::Until(i, l, r) => {
            (t + i.start()..=t + i.end()).any(|t1| holds(r, x, t1) && (t..=t1).all(|t2| holds(l, x, t2)))
        }
    }
}

/// Boolean satisfaction `x |= f` at time 0.
pub fn satisfies(f: &Formula, x: &Trajectory) -> Result<bool, StlError> {
    check_evaluable(f, x.dim(), x.final_time(), 0)?;
    Ok(holds(f, x, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::{parse, rect_region, Interval};

    fn traj(v: &[f64]) -> Trajectory {
        Trajectory::from_scalars(v).unwrap()
    }

    #[test]
    fn predicate_value() {
        let f = Formula::pred(vec![1.0], 0.0);
        assert_eq!(robustness(&f, &traj(&[2.0]), 0).unwrap(), 2.0);
    }

    #[test]
    fn eventually_takes_max() {
        let f = parse("F[0,2] x1 > 0").unwrap();
        let x = traj(&[-1.0, -0.5, 3.0]);
        assert_eq!(robustness(&f, &x, 0).unwrap(), 3.0);
        assert!(satisfies(&f, &x).unwrap());
        let g = parse("G[0,2] x1 > 0").unwrap();
        assert!(!satisfies(&g, &x).unwrap());
        assert!(satisfies(&Formula::True, &x).unwrap());
    }

    #[test]
    fn until_enumeration() {
        // t1=0: min(-0.5, 1) = -0.5; t1=1: min(0.5, min(1, 2)) = 0.5;
        // t1=2: min(-2.5, min(1, 2, -1)) = -2.5. Max is 0.5.
        let f = parse("(x1 > 0) U[0,2] (x1 > 1.5)").unwrap();
        let x = traj(&[1.0, 2.0, -1.0]);
        assert!((robustness(&f, &x, 0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn horizon_too_long_is_error() {
        let f = parse("F[0,5] x1 > 0").unwrap();
        assert_eq!(
            robustness(&f, &traj(&[0.0, 1.0]), 0),
            Err(StlError::HorizonExceedsTrajectory {
                needed: 5,
                available: 1
            })
        );
        assert!(satisfies(&f, &traj(&[0.0])).is_err());
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let f = Formula::pred(vec![1.0, 1.0], 0.0);
        assert!(matches!(
            robustness(&f, &traj(&[1.0]), 0),
            Err(StlError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rect_region_margins() {
        let r = rect_region(3.0, 5.0, 7.0, 9.0, 3).unwrap();
        let at = |x: f64, y: f64| {
            let t = Trajectory::new(vec![vec![x, y, 0.3]]).unwrap();
            robustness(&r, &t, 0).unwrap()
        };
        assert_eq!(at(4.0, 8.0), 1.0);
        assert_eq!(at(3.0, 8.0), 0.0);
        assert_eq!(at(0.0, 0.0), -7.0);
    }

    #[test]
    fn signal_shift_property() {
        let f = Formula::eventually(Interval::new(1, 2).unwrap(), Formula::pred(vec![1.0], 0.0));
        let x = traj(&[0.0, 4.0, -1.0, 2.0, 5.0]);
        let s = robustness_signal(&f, &x).unwrap();
        assert_eq!(s, vec![4.0, 2.0, 5.0]);
    }
}
