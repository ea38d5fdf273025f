use thiserror::Error;

use super::graph::{Graph, GraphError, Var};
use super::tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradCheckError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    /// A hard extremum has two arguments closer than the tie tolerance, so
    /// finite differences straddle a kink.
    #[error("point is not checkable: hard extremum gap {gap:e} below tolerance {tolerance:e}")]
    NonDifferentiable { gap: f64, tolerance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Central-difference step.
    pub step: f64,
    /// Minimum admissible gap between a hard extremum's winner and runner-up.
    pub tie_tolerance: f64,
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            step: 1e-5,
            tie_tolerance: 1e-3,
        }
    }
}

/// Coordinate of a single scalar parameter: (tensor index, flat element index).
pub type ParamCoord = (usize, usize);

impl GradCheck {
    pub fn with_step(step: f64) -> Self {
        GradCheck {
            step,
            ..Self::default()
        }
    }

    /// Norm-wise relative error `|a - d| / (|d| + 1e-12)` between the
    /// autodiff gradient `a` and the central differences `d`, Euclidean norms
    /// over every parameter entry. Entrywise ratios are not used: entries
    /// near 1e-9 sit at the roundoff floor of the differences.
    pub fn run<F>(&self, builder: F, params: &[Tensor]) -> Result<f64, GradCheckError>
    where
        F: FnMut(&mut Graph, &[Var]) -> Result<Var, GraphError>,
    {
        let coords: Vec<ParamCoord> = params
            .iter()
            .enumerate()
            .flat_map(|(t, p)| (0..p.len()).map(move |e| (t, e)))
            .collect();
        self.run_subset(builder, params, &coords)
    }

    /// As [`GradCheck::run`] but only over the listed coordinates.
    pub fn run_subset<F>(&self, mut builder: F, params: &[Tensor], coords: &[ParamCoord]) -> Result<f64, GradCheckError>
    where
        F: FnMut(&mut Graph, &[Var]) -> Result<Var, GraphError>,
    {
        let mut graph = Graph::new();
        let leaves: Vec<Var> = params.iter().map(|p| graph.leaf(p.clone())).collect();
        let out = builder(&mut graph, &leaves)?;
        if let Some(gap) = graph.min_extremum_gap() {
            if gap < self.tie_tolerance {
                return Err(GradCheckError::NonDifferentiable {
                    gap,
                    tolerance: self.tie_tolerance,
                });
            }
        }
        let grads = graph.backward(out)?;

        let mut eval = |ps: &[Tensor]| -> Result<f64, GraphError> {
            let mut g = Graph::new();
            let vars: Vec<Var> = ps.iter().map(|p| g.leaf(p.clone())).collect();
            let o = builder(&mut g, &vars)?;
            Ok(g.scalar(o))
        };

        let (mut diff, mut norm) = (0.0, 0.0);
        let mut work = params.to_vec();
        for &(t, e) in coords {
            let base = work[t].data()[e];
            work[t].data_mut()[e] = base + self.step;
            let up = eval(&work)?;
            work[t].data_mut()[e] = base - self.step;
            let down = eval(&work)?;
            work[t].data_mut()[e] = base;
            let numeric = (up - down) / (2.0 * self.step);
            let analytic = grads.wrt(leaves[t]).data()[e];
            diff += (analytic - numeric).powi(2);
            norm += numeric * numeric;
        }
        Ok(diff.sqrt() / (norm.sqrt() + 1e-12))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_graph_is_exact() {
        let params = vec![Tensor::column(vec![0.3, -1.2, 2.5])];
        let err = GradCheck::default()
            .run(
                |g, p| {
                    let y = g.linear_form(p[0], &[2.0, -1.0, 0.5], 3.0);
                    Ok(g.scale(y, 4.0))
                },
                &params,
            )
            .unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn tie_point_is_not_checkable() {
        let params = vec![Tensor::scalar(2.0), Tensor::scalar(2.0)];
        let res = GradCheck::default().run(|g, p| g.hard_max(&[p[0], p[1]]), &params);
        assert!(matches!(res, Err(GradCheckError::NonDifferentiable { .. })));
    }
}
