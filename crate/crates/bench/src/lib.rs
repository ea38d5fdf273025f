//! Unicycle case study and experiment pipeline for stl2vec.

// `!(a < b)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod config;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod world;
