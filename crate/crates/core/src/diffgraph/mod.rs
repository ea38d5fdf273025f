//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Graph`] records every operation as it is evaluated. Calling
//! [`Graph::backward`] on a scalar node sweeps the tape in reverse and returns
//! gradients for every leaf. Besides the usual arithmetic and nonlinearities
//! the tape provides the two extremum flavours needed for STL robustness:
//!
//! * exact `hard_max` / `hard_min`, whose subgradient goes to the first
//!   extremal argument;
//! * log-sum-exp `smooth_max` / `smooth_min` with a scale `beta`, which bound
//!   the exact extremum within `ln(m) / beta`.
//!
//! Graphs are single-threaded and cheap to rebuild; training loops build a
//! fresh graph per step and keep parameters as plain [`Tensor`]s updated by
//! [`Adam`].

mod adam;
mod check;
mod graph;
mod tensor;

pub use adam::{Adam, AdamConfig, AdamError};
pub use check::{GradCheck, GradCheckError, ParamCoord};
pub use graph::{Gradients, Graph, GraphError, Var};
pub use tensor::Tensor;

pub(crate) use graph::sigmoid;
