use thiserror::Error;

use super::tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("{op} requires at least one argument")]
    EmptyArguments { op: &'static str },
    #[error("smoothing parameter beta must be positive and finite, got {0}")]
    InvalidBeta(f64),
    #[error("backward requires a scalar output, got shape {rows}x{cols}")]
    NonScalarOutput { rows: usize, cols: usize },
    #[error("non-finite value produced by node {node} ({op})")]
    NonFinite { node: usize, op: &'static str },
    #[error("non-finite gradient reached node {node}")]
    NonFiniteGradient { node: usize },
}

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    ScaleShift { input: Var, scale: Vec<f64> },
    MatMul(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Sin(Var),
    Cos(Var),
    Element { input: Var, index: usize },
    Row { input: Var, row: usize },
    SliceRows { input: Var, start: usize },
    Concat(Vec<Var>),
    Sum(Var),
    AddN(Vec<Var>),
    LinearForm { input: Var, coeffs: Vec<f64> },
    Extremum { args: Vec<Var>, chosen: usize },
    Soft { args: Vec<Var>, weights: Vec<f64> },
    LogSoftmax { input: Var, probs: Vec<f64> },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::ScaleShift { .. } => "scale_shift",
            Op::MatMul(..) => "matmul",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Sin(_) => "sin",
            Op::Cos(_) => "cos",
            Op::Element { .. } => "element",
            Op::Row { .. } => "row",
            Op::SliceRows { .. } => "slice_rows",
            Op::Concat(_) => "concat",
            Op::Sum(_) => "sum",
            Op::AddN(_) => "add_n",
            Op::LinearForm { .. } => "linear_form",
            Op::Extremum { .. } => "hard_extremum",
            Op::Soft { .. } => "smooth_extremum",
            Op::LogSoftmax { .. } => "log_softmax",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// A reverse-mode tape. Nodes are appended in evaluation order, so creation
/// order is a topological order and backward simply walks it in reverse.
///
/// A graph is meant to be built, differentiated once and dropped; parameters
/// live outside it as plain [`Tensor`]s and are re-inserted as leaves on every
/// forward pass.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    first_nonfinite: Option<usize>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    /// Value of a scalar node.
    pub fn scalar(&self, var: Var) -> f64 {
        self.nodes[var.0].value.item()
    }

    /// Index of the first node whose value is NaN or infinite, if any.
    pub fn first_nonfinite(&self) -> Option<usize> {
        self.first_nonfinite
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let idx = self.nodes.len();
        if self.first_nonfinite.is_none() && !value.is_finite() {
            self.first_nonfinite = Some(idx);
        }
        self.nodes.push(Node { value, op });
        Var(idx)
    }

    /// Differentiable input (parameter or data).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn scalar_leaf(&mut self, value: f64) -> Var {
        self.leaf(Tensor::scalar(value))
    }

    fn same_shape(&self, a: Var, b: Var, op: &str) {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        assert_eq!(sa, sb, "{op}: shape mismatch {sa:?} vs {sb:?}");
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.same_shape(a, b, "add");
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.same_shape(a, b, "sub");
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.same_shape(a, b, "mul");
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    /// Elementwise `a * scale + shift` with constant per-element coefficients.
    pub fn affine(&mut self, a: Var, scale: &[f64], shift: &[f64]) -> Var {
        let n = self.value(a).len();
        assert!(
            scale.len() == n && shift.len() == n,
            "affine: coefficient length does not match input"
        );
        let src = self.value(a);
        let data = src
            .data()
            .iter()
            .zip(scale.iter().zip(shift))
            .map(|(&x, (&s, &o))| x * s + o)
            .collect();
        let v = Tensor::from_vec(src.rows(), src.cols(), data);
        self.push(
            v,
            Op::ScaleShift {
                input: a,
                scale: scale.to_vec(),
            },
        )
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let n = self.value(a).len();
        self.affine(a, &vec![c; n], &vec![0.0; n])
    }

    pub fn shift(&mut self, a: Var, c: f64) -> Var {
        let n = self.value(a).len();
        self.affine(a, &vec![1.0; n], &vec![c; n])
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::sin);
        self.push(v, Op::Sin(a))
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::cos);
        self.push(v, Op::Cos(a))
    }

    /// Flat (row-major) element as a scalar node.
    pub fn element(&mut self, a: Var, index: usize) -> Var {
        let v = Tensor::scalar(self.value(a).data()[index]);
        self.push(v, Op::Element { input: a, index })
    }

    /// Row `row` of a matrix as a 1 x cols node.
    pub fn row(&mut self, a: Var, row: usize) -> Var {
        let src = self.value(a);
        let v = Tensor::from_vec(1, src.cols(), src.row(row).to_vec());
        self.push(v, Op::Row { input: a, row })
    }

    /// Rows `start..start + len` of a matrix.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let src = self.value(a);
        let cols = src.cols();
        assert!(start + len <= src.rows(), "slice_rows out of range");
        let v = Tensor::from_vec(len, cols, src.data()[start * cols..(start + len) * cols].to_vec());
        self.push(v, Op::SliceRows { input: a, start })
    }

    /// Vertical concatenation of nodes with a common column count.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, GraphError> {
        let first = parts.first().ok_or(GraphError::EmptyArguments { op: "concat" })?;
        let cols = self.value(*first).cols();
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            assert_eq!(t.cols(), cols, "concat: column count mismatch");
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        Ok(self.push(Tensor::from_vec(rows, cols, data), Op::Concat(parts.to_vec())))
    }

    /// Sum of all entries.
    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).data().iter().sum());
        self.push(v, Op::Sum(a))
    }

    /// Elementwise sum of same-shaped nodes, accumulated left to right.
    pub fn add_n(&mut self, parts: &[Var]) -> Result<Var, GraphError> {
        let first = parts.first().ok_or(GraphError::EmptyArguments { op: "add_n" })?;
        let mut acc = self.value(*first).clone();
        for &p in &parts[1..] {
            self.same_shape(*first, p, "add_n");
            acc.add_assign(self.value(p));
        }
        Ok(self.push(acc, Op::AddN(parts.to_vec())))
    }

    pub fn mean(&mut self, parts: &[Var]) -> Result<Var, GraphError> {
        let total = self.add_n(parts)?;
        Ok(self.scale(total, 1.0 / parts.len() as f64))
    }

    /// `coeffs . a + offset` for a node with `coeffs.len()` entries.
    pub fn linear_form(&mut self, a: Var, coeffs: &[f64], offset: f64) -> Var {
        let src = self.value(a);
        assert_eq!(src.len(), coeffs.len(), "linear_form: length mismatch");
        let mut acc = 0.0;
        for (x, c) in src.data().iter().zip(coeffs) {
            acc += c * x;
        }
        let v = Tensor::scalar(acc + offset);
        self.push(
            v,
            Op::LinearForm {
                input: a,
                coeffs: coeffs.to_vec(),
            },
        )
    }

    fn scalars(&self, args: &[Var]) -> Vec<f64> {
        args.iter().map(|&a| self.scalar(a)).collect()
    }

    fn extremum(&mut self, args: &[Var], want_max: bool, op: &'static str) -> Result<Var, GraphError> {
        if args.is_empty() {
            return Err(GraphError::EmptyArguments { op });
        }
        let vals = self.scalars(args);
        let mut chosen = 0;
        for (i, &v) in vals.iter().enumerate().skip(1) {
            let better = if want_max { v > vals[chosen] } else { v < vals[chosen] };
            if better {
                chosen = i;
            }
        }
        Ok(self.push(
            Tensor::scalar(vals[chosen]),
            Op::Extremum {
                args: args.to_vec(),
                chosen,
            },
        ))
    }

    /// Exact maximum of scalar nodes. The gradient is routed to the first
    /// maximizing argument.
    pub fn hard_max(&mut self, args: &[Var]) -> Result<Var, GraphError> {
        self.extremum(args, true, "hard_max")
    }

    /// Exact minimum of scalar nodes. The gradient is routed to the first
    /// minimizing argument.
    pub fn hard_min(&mut self, args: &[Var]) -> Result<Var, GraphError> {
        self.extremum(args, false, "hard_min")
    }

    fn soft(&mut self, args: &[Var], beta: f64, sign: f64, op: &'static str) -> Result<Var, GraphError> {
        if args.is_empty() {
            return Err(GraphError::EmptyArguments { op });
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(GraphError::InvalidBeta(beta));
        }
        // For sign = -1 this evaluates -smooth_max(-a).
        let vals: Vec<f64> = self.scalars(args).into_iter().map(|v| sign * v).collect();
        let peak = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = vals.iter().map(|&v| (beta * (v - peak)).exp()).collect();
        let total: f64 = exps.iter().sum();
        let value = sign * (peak + total.ln() / beta);
        let weights = exps.into_iter().map(|e| e / total).collect();
        Ok(self.push(
            Tensor::scalar(value),
            Op::Soft {
                args: args.to_vec(),
                weights,
            },
        ))
    }

    /// `(1/beta) ln sum exp(beta a_i)`, evaluated with max subtraction.
    pub fn smooth_max(&mut self, args: &[Var], beta: f64) -> Result<Var, GraphError> {
        self.soft(args, beta, 1.0, "smooth_max")
    }

    /// `-(1/beta) ln sum exp(-beta a_i)`, evaluated with min subtraction.
    pub fn smooth_min(&mut self, args: &[Var], beta: f64) -> Result<Var, GraphError> {
        self.soft(args, beta, -1.0, "smooth_min")
    }

    /// Log-softmax over all entries of `a` (any shape).
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let peak = src.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = src.data().iter().map(|&v| (v - peak).exp()).sum();
        let lse = peak + total.ln();
        let out = src.map(|v| v - lse);
        let probs = out.data().iter().map(|v| v.exp()).collect();
        self.push(out, Op::LogSoftmax { input: a, probs })
    }

    /// Smallest gap between the selected argument of any hard extremum and its
    /// nearest competitor. `None` when the graph has no multi-argument extremum.
    pub fn min_extremum_gap(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for node in &self.nodes {
            if let Op::Extremum { args, chosen } = &node.op {
                let pick = self.scalar(args[*chosen]);
                for (i, &a) in args.iter().enumerate() {
                    if i != *chosen {
                        let gap = (self.scalar(a) - pick).abs();
                        best = Some(best.map_or(gap, |b: f64| b.min(gap)));
                    }
                }
            }
        }
        best
    }

    /// Reverse sweep from a scalar output. Leaves that the output does not
    /// depend on receive zero gradients.
    pub fn backward(&self, output: Var) -> Result<Gradients, GraphError> {
        let out = &self.nodes[output.0];
        if !out.value.is_scalar() {
            let (rows, cols) = out.value.shape();
            return Err(GraphError::NonScalarOutput { rows, cols });
        }
        if let Some(node) = self.first_nonfinite.filter(|&n| n <= output.0) {
            return Err(GraphError::NonFinite {
                node,
                op: self.nodes[node].op.name(),
            });
        }

        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !g.is_finite() {
                return Err(GraphError::NonFiniteGradient { node: idx });
            }
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, &g);
                    accumulate(&mut grads, *b, &g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, &g);
                    accumulate(&mut grads, *b, &g.map(|v| -v));
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.value(*b), |x, y| x * y);
                    let gb = g.zip_map(self.value(*a), |x, y| x * y);
                    accumulate(&mut grads, *a, &ga);
                    accumulate(&mut grads, *b, &gb);
                }
                Op::ScaleShift { input, scale } => {
                    let mut ga = g.clone();
                    for (v, s) in ga.data_mut().iter_mut().zip(scale) {
                        *v *= s;
                    }
                    accumulate(&mut grads, *input, &ga);
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul(&self.value(*b).transpose());
                    let gb = self.value(*a).transpose().matmul(&g);
                    accumulate(&mut grads, *a, &ga);
                    accumulate(&mut grads, *b, &gb);
                }
                Op::Tanh(a) => {
                    let ga = g.zip_map(&node.value, |x, y| x * (1.0 - y * y));
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Sigmoid(a) => {
                    let ga = g.zip_map(&node.value, |x, y| x * y * (1.0 - y));
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Sin(a) => {
                    let ga = g.zip_map(self.value(*a), |x, y| x * y.cos());
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Cos(a) => {
                    let ga = g.zip_map(self.value(*a), |x, y| -x * y.sin());
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Element { input, index } => {
                    let (r, c) = self.value(*input).shape();
                    let mut ga = Tensor::zeros(r, c);
                    ga.data_mut()[*index] = g.item();
                    accumulate(&mut grads, *input, &ga);
                }
                Op::Row { input, row } => {
                    let (r, c) = self.value(*input).shape();
                    let mut ga = Tensor::zeros(r, c);
                    ga.data_mut()[row * c..(row + 1) * c].copy_from_slice(g.data());
                    accumulate(&mut grads, *input, &ga);
                }
                Op::SliceRows { input, start } => {
                    let (r, c) = self.value(*input).shape();
                    let mut ga = Tensor::zeros(r, c);
                    ga.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                    accumulate(&mut grads, *input, &ga);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (r, c) = self.value(p).shape();
                        let piece = Tensor::from_vec(r, c, g.data()[offset..offset + r * c].to_vec());
                        offset += r * c;
                        accumulate(&mut grads, p, &piece);
                    }
                }
                Op::Sum(a) => {
                    let (r, c) = self.value(*a).shape();
                    accumulate(&mut grads, *a, &Tensor::filled(r, c, g.item()));
                }
                Op::AddN(parts) => {
                    for &p in parts {
                        accumulate(&mut grads, p, &g);
                    }
                }
                Op::LinearForm { input, coeffs } => {
                    let (r, c) = self.value(*input).shape();
                    let gi = g.item();
                    let ga = Tensor::from_vec(r, c, coeffs.iter().map(|k| k * gi).collect());
                    accumulate(&mut grads, *input, &ga);
                }
                Op::Extremum { args, chosen } => {
                    accumulate(&mut grads, args[*chosen], &g);
                }
                Op::Soft { args, weights } => {
                    let gi = g.item();
                    for (&a, &w) in args.iter().zip(weights) {
                        accumulate(&mut grads, a, &Tensor::scalar(gi * w));
                    }
                }
                Op::LogSoftmax { input, probs } => {
                    let total: f64 = g.data().iter().sum();
                    let mut ga = g.clone();
                    for (v, p) in ga.data_mut().iter_mut().zip(probs) {
                        *v -= p * total;
                    }
                    accumulate(&mut grads, *input, &ga);
                }
            }
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
            }
        }

        for (idx, slot) in grads.iter_mut().enumerate() {
            if slot.is_none() && matches!(self.nodes[idx].op, Op::Leaf) {
                let (r, c) = self.nodes[idx].value.shape();
                *slot = Some(Tensor::zeros(r, c));
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], var: Var, g: &Tensor) {
    match &mut grads[var.0] {
        Some(existing) => existing.add_assign(g),
        slot @ None => *slot = Some(g.clone()),
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Leaf gradients produced by [`Graph::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the output with respect to a leaf. Panics for non-leaf
    /// nodes or nodes created after the output.
    pub fn wrt(&self, var: Var) -> &Tensor {
        self.grads
            .get(var.0)
            .and_then(Option::as_ref)
            .expect("gradient requested for a non-leaf node or a node after the output")
    }
}
