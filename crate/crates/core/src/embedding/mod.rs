//! Specification embeddings learned with a skip-gram over robustness
//! closeness.
//!
//! For each spec an optimal trajectory is computed, every spec is scored on
//! it, and the specs whose robustness lies closest to the center's become
//! its context. A softmax skip-gram trained on these pairs places specs that
//! are satisfied by similar behaviour near each other.

mod dataset;
mod io;
mod skipgram;

use thiserror::Error;

use crate::stl::{Formula, StlError};
use crate::trajopt::OptError;

pub use dataset::{
    generate_dataset, is_ranked_selection, select_contexts, Dataset, DatasetConfig, DatasetSample, SkipGramRecord,
};
pub use io::{read_dataset, read_embedding, write_dataset, write_embedding};
pub use skipgram::{train_skipgram, EmbeddingModel, SkipGramConfig, SkipGramTraining};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("a spec set needs at least two specs, got {0}")]
    TooFewSpecs(usize),
    #[error("{names} names for {specs} specs")]
    NameCount { specs: usize, names: usize },
    #[error("context size {p} must be in 1..={}", .m - 1)]
    ContextSize { p: usize, m: usize },
    #[error("at least one iteration per spec is required")]
    NoIterations,
    #[error("sampler has dimension {found}, system has {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("index {index} out of range for {len} specs")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("empty training dataset")]
    EmptyDataset,
    #[error("embedding dimension must be positive")]
    ZeroDimension,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("weight shapes {w_in:?} and {w_out:?} are inconsistent")]
    Shape {
        w_in: (usize, usize),
        w_out: (usize, usize),
    },
    #[error("cosine similarity of a zero vector")]
    ZeroVector,
    #[error("k = {k} must be in 1..={max}")]
    NeighbourCount { k: usize, max: usize },
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error(transparent)]
    Opt(#[from] OptError),
}

/// Ordered candidate specifications. Position `i` is the one-hot index.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecSet {
    specs: Vec<Formula>,
    names: Vec<String>,
}

impl SpecSet {
    pub fn new(specs: Vec<Formula>, names: Vec<String>) -> Result<Self, EmbeddingError> {
        if specs.len() < 2 {
            return Err(EmbeddingError::TooFewSpecs(specs.len()));
        }
        if names.len() != specs.len() {
            return Err(EmbeddingError::NameCount {
                specs: specs.len(),
                names: names.len(),
            });
        }
        Ok(SpecSet { specs, names })
    }

    /// Names taken from each formula's printed form.
    pub fn unnamed(specs: Vec<Formula>) -> Result<Self, EmbeddingError> {
        let names = specs.iter().map(|f| f.to_string()).collect();
        Self::new(specs, names)
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn spec(&self, i: usize) -> &Formula {
        &self.specs[i]
    }

    pub fn specs(&self) -> &[Formula] {
        &self.specs
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn max_horizon(&self) -> usize {
        self.specs.iter().map(Formula::horizon).max().unwrap_or(0)
    }

    /// Sub-set in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self, EmbeddingError> {
        let specs = indices.iter().map(|&i| self.specs[i].clone()).collect();
        let names = indices.iter().map(|&i| self.names[i].clone()).collect();
        Self::new(specs, names)
    }
}

/// One-hot vector of length `m` with a 1 at `i`.
pub fn one_hot(i: usize, m: usize) -> Vec<f64> {
    let mut v = vec![0.0; m];
    v[i] = 1.0;
    v
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, EmbeddingError> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// The `k` specs most cosine-similar to spec `i`, descending, ties to the
/// lower index. `i` itself is excluded.
pub fn nearest(model: &EmbeddingModel, i: usize, k: usize) -> Result<Vec<(usize, f64)>, EmbeddingError> {
    let m = model.num_specs();
    let zi = model.embed(i)?;
    if k == 0 || k > m - 1 {
        return Err(EmbeddingError::NeighbourCount { k, max: m - 1 });
    }
    let mut sims = Vec::with_capacity(m - 1);
    for j in (0..m).filter(|&j| j != i) {
        sims.push((j, cosine_similarity(zi, model.embed(j)?)?));
    }
    sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    sims.truncate(k);
    Ok(sims)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffgraph::Tensor;

    #[test]
    fn cosine_cases() {
        let z = [0.3, -1.2, 2.0];
        assert!((cosine_similarity(&z, &z).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), -1.0);
        assert_eq!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(EmbeddingError::ZeroVector)
        );
    }

    #[test]
    fn identity_embedding_rows() {
        let mut eye = Tensor::zeros(3, 3);
        for i in 0..3 {
            eye.set(i, i, 1.0);
        }
        let model = EmbeddingModel::new(eye.clone(), eye).unwrap();
        assert_eq!(model.embed(1).unwrap(), &[0.0, 1.0, 0.0]);
        assert_eq!(one_hot(1, 3), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn nearest_finds_constructed_twin() {
        let mut w = Tensor::zeros(6, 6);
        for i in 0..5 {
            w.set(i, i, 1.0);
        }
        w.set(5, 0, 1.0);
        let model = EmbeddingModel::new(w.clone(), w.transpose()).unwrap();
        assert_eq!(nearest(&model, 0, 1).unwrap(), vec![(5, 1.0)]);
        let all = nearest(&model, 0, 5).unwrap();
        let mut idx: Vec<usize> = all.iter().map(|p| p.0).collect();
        idx.sort();
        assert_eq!(idx, vec![1, 2, 3, 4, 5]);
        assert!(nearest(&model, 0, 6).is_err());
    }

    #[test]
    fn spec_set_needs_two() {
        assert!(SpecSet::unnamed(vec![Formula::True]).is_err());
        assert_eq!(SpecSet::unnamed(vec![Formula::True, Formula::True]).unwrap().len(), 2);
    }
}
