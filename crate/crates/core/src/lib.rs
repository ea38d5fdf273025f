//! Specification embeddings for signal temporal logic and recurrent
//! controllers conditioned on them.
//!
//! The crate is organised bottom-up:
//!
//! * [`diffgraph`]: reverse-mode autodiff tape, exact and log-sum-exp
//!   extrema, Adam.
//! * [`stl`]: formulas, parser, Boolean and quantitative semantics.
//! * [`trajopt`]: open-loop robustness maximization with bounded inputs.
//! * [`embedding`]: skip-gram dataset generation from robustness similarity
//!   and skip-gram training.
//! * [`policy`]: LSTM controllers with bounded outputs, specification
//!   encodings, training and evaluation.
//! * [`seeding`]: deterministic seed derivation shared by all stages.

// `!(a < b)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffgraph;
pub mod dynamics;
pub mod embedding;
pub mod policy;
pub mod seeding;
pub mod stl;
pub mod trajopt;
