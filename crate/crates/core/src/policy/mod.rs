//! Specification-conditioned recurrent controllers.
//!
//! An [`LstmPolicy`] reads `s_t = [x_t; z]` where `z` encodes the target
//! specification, and emits bounded inputs. Training maximizes the mean
//! robustness of closed-loop rollouts by backpropagation through time.

mod io;
mod lstm;
mod train;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::diffgraph::{AdamError, GraphError};
use crate::dynamics::DynamicsError;
use crate::embedding::{one_hot, EmbeddingModel};
use crate::stl::StlError;

pub use io::{read_checkpoint, read_training_log, write_checkpoint, write_training_log};
pub use lstm::{HiddenState, LstmPolicy};
pub use train::{
    batch_loss_graph, evaluate, sample_initial_states, train, train_one_by_one, Controller, EvalRecord, EvalResult,
    OneByOneTraining, TrainConfig, Training, TrainingLog,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("hidden size, layer count and state dimension must be positive")]
    Architecture,
    #[error("expected a vector of length {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("parameter list does not match the architecture")]
    ParamShape,
    #[error("batch size {nb} must be in 1..={m}")]
    BatchSize { nb: usize, m: usize },
    #[error("at least one initial state is required")]
    NoInitialStates,
    #[error("encoding covers {found} specs, the set has {expected}")]
    EncodingSize { expected: usize, found: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch} (first bad tape node {node:?})")]
    NonFinite {
        epoch: usize,
        batch: usize,
        node: Option<usize>,
    },
    #[error("{policies} policies for {specs} specs")]
    PolicyCount { policies: usize, specs: usize },
    #[error(transparent)]
    Bounds(#[from] DynamicsError),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error(transparent)]
    Adam(#[from] AdamError),
}

impl From<GraphError> for PolicyError {
    fn from(e: GraphError) -> Self {
        PolicyError::Stl(StlError::Graph(e))
    }
}

/// How the target specification is presented to the controller.
#[derive(Debug, Clone, PartialEq)]
pub enum SpecEncoding {
    /// Learned embedding rows.
    Stl2vec(EmbeddingModel),
    /// The scalar `i + 1`, unnormalized.
    Integer {
        specs: usize,
    },
    OneHot {
        specs: usize,
    },
    /// No encoding input; used by per-spec controllers.
    None,
}

impl SpecEncoding {
    pub fn kind(&self) -> &'static str {
        match self {
            SpecEncoding::Stl2vec(_) => "stl2vec",
            SpecEncoding::Integer { .. } => "integer",
            SpecEncoding::OneHot { .. } => "onehot",
            SpecEncoding::None => "none",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SpecEncoding::Stl2vec(m) => m.dim(),
            SpecEncoding::Integer { .. } => 1,
            SpecEncoding::OneHot { specs } => *specs,
            SpecEncoding::None => 0,
        }
    }

    /// Number of specs the encoding can address; `None` for no encoding.
    pub fn num_specs(&self) -> Option<usize> {
        match self {
            SpecEncoding::Stl2vec(m) => Some(m.num_specs()),
            SpecEncoding::Integer { specs } | SpecEncoding::OneHot { specs } => Some(*specs),
            SpecEncoding::None => None,
        }
    }

    /// Encoding vector of spec `i`. Panics if `i` is out of range.
    pub fn encode(&self, i: usize) -> Vec<f64> {
        match self {
            SpecEncoding::Stl2vec(m) => m.embed(i).expect("spec index in range").to_vec(),
            SpecEncoding::Integer { specs } => {
                assert!(i < *specs, "spec index {i} out of range");
                vec![(i + 1) as f64]
            }
            SpecEncoding::OneHot { specs } => one_hot(i, *specs),
            SpecEncoding::None => Vec::new(),
        }
    }
}

/// Random permutation of `0..m` cut into `m / nb` batches of `nb`; the
/// remainder joins the last batch.
pub fn make_batches<R: Rng + ?Sized>(m: usize, nb: usize, rng: &mut R) -> Result<Vec<Vec<usize>>, PolicyError> {
    if nb == 0 || nb > m {
        return Err(PolicyError::BatchSize { nb, m });
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let count = m / nb;
    let mut batches: Vec<Vec<usize>> = order[..count * nb].chunks(nb).map(<[usize]>::to_vec).collect();
    batches.last_mut().unwrap().extend_from_slice(&order[count * nb..]);
    Ok(batches)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Shared controller with learned embeddings.
    Proposed,
    /// Integer encoding.
    A1,
    /// One-hot encoding.
    A2,
    /// One controller per spec.
    A3,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Proposed, Method::A1, Method::A2, Method::A3];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::A1 => "A1",
            Method::A2 => "A2",
            Method::A3 => "A3",
        }
    }
}

/// Sizes entering the parameter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamDims {
    /// Number of specs `M`.
    pub specs: u64,
    /// Embedding dimension `N`.
    pub embed: u64,
    pub state: u64,
    pub input: u64,
    pub hidden: u64,
    pub layers: u64,
}

/// Parameter count by the published per-method formulas, which only count
/// input-to-gate and output weights.
pub fn count_params(d: ParamDims, method: Method) -> u64 {
    let gates = 4 * d.hidden * d.layers;
    match method {
        Method::Proposed => d.specs * d.embed + gates * (d.state + d.embed) + gates * d.input,
        Method::A1 => gates * d.state + gates * d.input,
        Method::A2 => gates * (d.state + d.specs),
        Method::A3 => d.specs * (gates * d.state + gates * d.input),
    }
}

/// Actual number of trainable scalars, recurrent weights and biases included.
/// For the proposed method this adds the `M x N` embedding table.
pub fn count_params_true(d: ParamDims, method: Method) -> u64 {
    let net = |enc: u64| {
        let h = d.hidden;
        let first = 4 * h * (d.state + enc + h + 1);
        let rest = (d.layers - 1) * 4 * h * (2 * h + 1);
        first + rest + d.input * h
    };
    match method {
        Method::Proposed => d.specs * d.embed + net(d.embed),
        Method::A1 => net(1),
        Method::A2 => net(d.specs),
        Method::A3 => d.specs * net(0),
    }
}
