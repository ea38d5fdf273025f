use std::collections::BTreeMap;

use rand::Rng;

use crate::diffgraph::{Graph, Tensor, Var};
use crate::seeding::{task_rng, STREAM_INIT, STREAM_TRAIN};
use crate::stl::StlError;

use super::{EmbeddingError, SkipGramRecord};

/// Skip-gram weights: `w_in` is `M x N` (rows are the embeddings), `w_out`
/// is `N x M` and shared by all `P` output layers.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    w_in: Tensor,
    w_out: Tensor,
}

impl EmbeddingModel {
    pub fn new(w_in: Tensor, w_out: Tensor) -> Result<Self, EmbeddingError> {
        let (m, n) = w_in.shape();
        if w_out.shape() != (n, m) || n == 0 || m == 0 {
            return Err(EmbeddingError::Shape {
                w_in: w_in.shape(),
                w_out: w_out.shape(),
            });
        }
        Ok(EmbeddingModel { w_in, w_out })
    }

    /// Entries uniform in `[-0.5/N, 0.5/N]`.
    pub fn random(m: usize, n: usize, seed: u64) -> Self {
        let mut rng = task_rng(seed, &[STREAM_INIT]);
        let half = 0.5 / n as f64;
        let mut draw = |len: usize| (0..len).map(|_| rng.random_range(-half..=half)).collect::<Vec<_>>();
        let w_in = Tensor::from_vec(m, n, draw(m * n));
        let w_out = Tensor::from_vec(n, m, draw(n * m));
        EmbeddingModel { w_in, w_out }
    }

    pub fn num_specs(&self) -> usize {
        self.w_in.rows()
    }

    pub fn dim(&self) -> usize {
        self.w_in.cols()
    }

    pub fn w_in(&self) -> &Tensor {
        &self.w_in
    }

    pub fn w_out(&self) -> &Tensor {
        &self.w_out
    }

    /// Embedding of spec `i`: row `i` of `w_in`.
    pub fn embed(&self, i: usize) -> Result<&[f64], EmbeddingError> {
        if i >= self.num_specs() {
            return Err(EmbeddingError::IndexOutOfRange {
                index: i,
                len: self.num_specs(),
            });
        }
        Ok(self.w_in.row(i))
    }

    /// Softmax over output specs given center `i`.
    pub fn context_probabilities(&self, i: usize) -> Result<Vec<f64>, EmbeddingError> {
        let z = Tensor::from_vec(1, self.dim(), self.embed(i)?.to_vec());
        let logits = z.matmul(&self.w_out);
        let peak = logits.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.data().iter().map(|v| (v - peak).exp()).collect();
        let total: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / total).collect())
    }

    /// Mean cross-entropy over every (record, context target) pair.
    pub fn loss(&self, records: &[SkipGramRecord]) -> Result<f64, EmbeddingError> {
        let mut g = Graph::new();
        let w_in = g.constant(self.w_in.clone());
        let w_out = g.constant(self.w_out.clone());
        let out = loss_graph(&mut g, w_in, w_out, records)?;
        Ok(g.scalar(out))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramConfig {
    /// Embedding dimension `N`.
    pub dim: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Records per gradient step; `None` is full batch.
    pub batch_size: Option<usize>,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 20,
            epochs: 100,
            lr: 0.05,
            batch_size: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramTraining {
    pub model: EmbeddingModel,
    /// Mean loss over the whole dataset before each epoch, then after the last.
    pub losses: Vec<f64>,
}

fn loss_graph(g: &mut Graph, w_in: Var, w_out: Var, records: &[SkipGramRecord]) -> Result<Var, EmbeddingError> {
    let m = g.value(w_in).rows();
    let total: usize = records.iter().map(|r| r.context.len()).sum();
    if total == 0 {
        return Err(EmbeddingError::EmptyDataset);
    }
    // Target counts per center; each center row is pushed through the
    // softmax once.
    let mut counts: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        if r.center >= m {
            return Err(EmbeddingError::IndexOutOfRange {
                index: r.center,
                len: m,
            });
        }
        let row = counts.entry(r.center).or_insert_with(|| vec![0.0; m]);
        for &k in &r.context {
            if k >= m {
                return Err(EmbeddingError::IndexOutOfRange { index: k, len: m });
            }
            row[k] += 1.0;
        }
    }
    let mut terms = Vec::with_capacity(counts.len());
    for (center, row) in counts {
        let z = g.row(w_in, center);
        let logits = g.matmul(z, w_out);
        let logp = g.log_softmax(logits);
        let weights: Vec<f64> = row.iter().map(|c| -c / total as f64).collect();
        terms.push(g.linear_form(logp, &weights, 0.0));
    }
    Ok(g.add_n(&terms).map_err(StlError::from)?)
}

/// Gradient-descent training of the skip-gram on `records` over `m` specs.
pub fn train_skipgram(
    records: &[SkipGramRecord],
    m: usize,
    cfg: &SkipGramConfig,
) -> Result<SkipGramTraining, EmbeddingError> {
    if records.is_empty() {
        return Err(EmbeddingError::EmptyDataset);
    }
    if cfg.dim == 0 {
        return Err(EmbeddingError::ZeroDimension);
    }
    let mut model = EmbeddingModel::random(m, cfg.dim, cfg.seed);
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    let batch = cfg.batch_size.unwrap_or(records.len()).max(1);
    let mut order: Vec<usize> = (0..records.len()).collect();
    for epoch in 0..cfg.epochs {
        losses.push(model.loss(records)?);
        if cfg.batch_size.is_some() {
            let mut rng = task_rng(cfg.seed, &[STREAM_TRAIN, epoch as u64]);
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        }
        for chunk in order.chunks(batch) {
            let subset: Vec<SkipGramRecord> = chunk.iter().map(|&k| records[k].clone()).collect();
            let mut g = Graph::new();
            let w_in = g.leaf(model.w_in.clone());
            let w_out = g.leaf(model.w_out.clone());
            let loss = loss_graph(&mut g, w_in, w_out, &subset)?;
            let value = g.scalar(loss);
            if !value.is_finite() {
                return Err(EmbeddingError::Diverged { epoch });
            }
            let grads = g.backward(loss).map_err(|_| EmbeddingError::Diverged { epoch })?;
            let lr = cfg.lr;
            model.w_in = model.w_in.zip_map(grads.wrt(w_in), |w, d| w - lr * d);
            model.w_out = model.w_out.zip_map(grads.wrt(w_out), |w, d| w - lr * d);
        }
    }
    let last = model.loss(records)?;
    if !last.is_finite() {
        return Err(EmbeddingError::Diverged { epoch: cfg.epochs });
    }
    losses.push(last);
    Ok(SkipGramTraining { model, losses })
}
