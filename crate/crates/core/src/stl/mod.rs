//! Signal temporal logic over discrete-time trajectories.
//!
//! Formulas are built from affine predicates `c . x + d > 0`, Boolean
//! connectives and the bounded temporal operators `F`, `G` and `U`. The module
//! provides a text parser, horizon computation, Boolean satisfaction and
//! quantitative robustness (min for conjunction and `G`, max for disjunction
//! and `F`, `rho(not f) = -rho(f)`), both as plain `f64` evaluation and as
//! a differentiable graph.

mod diff;
mod formula;
mod parser;
mod semantics;

use thiserror::Error;

use crate::diffgraph::GraphError;

pub use diff::{robustness_on_graph, RobustnessMode};
pub use formula::{rect_region, Formula, Interval, LinearPredicate, TRUE_ROBUSTNESS};
pub use parser::{parse, parse_with_dim, ParseError, ParseErrorKind};
pub use semantics::{robustness, robustness_signal, satisfies, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StlError {
    #[error("interval [{a},{b}] has a > b")]
    InvalidInterval { a: usize, b: usize },
    #[error("empty rectangle [{xlo},{xhi}]x[{ylo},{yhi}]")]
    EmptyRectangle { xlo: f64, xhi: f64, ylo: f64, yhi: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("formula needs states up to t={needed} but the trajectory ends at t={available}")]
    HorizonExceedsTrajectory { needed: usize, available: usize },
    #[error("trajectory has no states")]
    EmptyTrajectory,
    #[error(transparent)]
    Graph(#[from] GraphError),
}
