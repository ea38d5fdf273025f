use std::fmt;

use super::StlError;

/// Robustness assigned to `true`. Finite so that it can flow through min/max
/// and the autodiff tape without special cases.
pub const TRUE_ROBUSTNESS: f64 = 1e9;

/// Closed discrete time interval `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Interval {
    a: usize,
    b: usize,
}

impl Interval {
    pub fn new(a: usize, b: usize) -> Result<Self, StlError> {
        if a > b {
            return Err(StlError::InvalidInterval { a, b });
        }
        Ok(Interval { a, b })
    }

    pub fn start(&self) -> usize {
        self.a
    }

    pub fn end(&self) -> usize {
        self.b
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.a, self.b)
    }
}

/// Affine predicate `h(x) = c . x + d`, satisfied when `h(x) > 0`.
#[derive(Debug, Clone)]
pub struct LinearPredicate {
    coeffs: Vec<f64>,
    offset: f64,
    label: Option<String>,
}

impl LinearPredicate {
    pub fn new(coeffs: Vec<f64>, offset: f64) -> Self {
        LinearPredicate {
            coeffs,
            offset,
            label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// `h(x)`, accumulated left to right then offset.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, v) in self.coeffs.iter().zip(x) {
            acc += c * v;
        }
        acc + self.offset
    }

    pub(crate) fn pad_to(&mut self, dim: usize) {
        if self.coeffs.len() < dim {
            self.coeffs.resize(dim, 0.0);
        }
    }
}

/// Labels are presentation only and do not take part in equality.
impl PartialEq for LinearPredicate {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs && self.offset == other.offset
    }
}

/// STL abstract syntax tree over discrete time.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    Pred(LinearPredicate),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Always(Interval, Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn pred(coeffs: Vec<f64>, offset: f64) -> Self {
        Formula::Pred(LinearPredicate::new(coeffs, offset))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Self {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Self {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn eventually(i: Interval, f: Formula) -> Self {
        Formula::Eventually(i, Box::new(f))
    }

    pub fn always(i: Interval, f: Formula) -> Self {
        Formula::Always(i, Box::new(f))
    }

    pub fn until(i: Interval, l: Formula, r: Formula) -> Self {
        Formula::Until(i, Box::new(l), Box::new(r))
    }

    /// Number of time steps after `t` needed to evaluate the formula at `t`.
    pub fn horizon(&self) -> usize {
        match self {
            Formula::True | Formula::Pred(_) => 0,
            Formula::Not(f) => f.horizon(),
            Formula::And(l, r) | Formula::Or(l, r) => l.horizon().max(r.horizon()),
            Formula::Eventually(i, f) | Formula::Always(i, f) => i.end() + f.horizon(),
            Formula::Until(i, l, r) => i.end() + l.horizon().max(r.horizon()),
        }
    }

    /// Operator nesting depth; atoms have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::Pred(_) => 0,
            Formula::Not(f) | Formula::Eventually(_, f) | Formula::Always(_, f) => 1 + f.depth(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Until(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Largest predicate dimension in the tree, `None` if there are none.
    pub fn dim(&self) -> Option<usize> {
        let mut out: Option<usize> = None;
        self.visit_predicates(&mut |p| out = Some(out.map_or(p.dim(), |d| d.max(p.dim()))));
        out
    }

    /// Checks that every predicate has exactly `dim` coefficients.
    pub fn check_dim(&self, dim: usize) -> Result<(), StlError> {
        let mut bad = None;
        self.visit_predicates(&mut |p| {
            if p.dim() != dim && bad.is_none() {
                bad = Some(p.dim());
            }
        });
        match bad {
            Some(found) => Err(StlError::DimensionMismatch { expected: dim, found }),
            None => Ok(()),
        }
    }

    fn visit_predicates(&self, f: &mut impl FnMut(&LinearPredicate)) {
        match self {
            Formula::True => {}
            Formula::Pred(p) => f(p),
            Formula::Not(c) | Formula::Eventually(_, c) | Formula::Always(_, c) => c.visit_predicates(f),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Until(_, l, r) => {
                l.visit_predicates(f);
                r.visit_predicates(f);
            }
        }
    }

    pub(crate) fn pad_predicates(&mut self, dim: usize) {
        match self {
            Formula::True => {}
            Formula::Pred(p) => p.pad_to(dim),
            Formula::Not(c) | Formula::Eventually(_, c) | Formula::Always(_, c) => c.pad_predicates(dim),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Until(_, l, r) => {
                l.pad_predicates(dim);
                r.pad_predicates(dim);
            }
        }
    }

    fn is_binary(&self) -> bool {
        matches!(self, Formula::And(..) | Formula::Or(..) | Formula::Until(..))
    }
}

/// Axis-aligned box `[xlo, xhi] x [ylo, yhi]` over the first two state
/// coordinates of a `dim`-dimensional state. Robustness is the smallest of the
/// four margins.
pub fn rect_region(xlo: f64, xhi: f64, ylo: f64, yhi: f64, dim: usize) -> Result<Formula, StlError> {
    if !(xlo < xhi && ylo < yhi) {
        return Err(StlError::EmptyRectangle { xlo, xhi, ylo, yhi });
    }
    if dim < 2 {
        return Err(StlError::DimensionMismatch {
            expected: 2,
            found: dim,
        });
    }
    let axis = |k: usize, sign: f64| {
        let mut c = vec![0.0; dim];
        c[k] = sign;
        c
    };
    let left = LinearPredicate::new(axis(0, 1.0), -xlo).with_label(format!("x1 >= {xlo}"));
    let right = LinearPredicate::new(axis(0, -1.0), xhi).with_label(format!("x1 <= {xhi}"));
    let bottom = LinearPredicate::new(axis(1, 1.0), -ylo).with_label(format!("x2 >= {ylo}"));
    let top = LinearPredicate::new(axis(1, -1.0), yhi).with_label(format!("x2 <= {yhi}"));
    Ok(Formula::and(
        Formula::and(Formula::Pred(left), Formula::Pred(right)),
        Formula::and(Formula::Pred(bottom), Formula::Pred(top)),
    ))
}

struct Child<'a>(&'a Formula);

impl fmt::Display for Child<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_binary() {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for LinearPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, c) in self.coeffs.iter().enumerate() {
            if *c != 0.0 {
                write!(f, "{c}*x{} + ", k + 1)?;
            }
        }
        write!(f, "{} > 0", self.offset)
    }
}

/// Prints in the text grammar accepted by [`super::parse`]; binary children
/// are always parenthesized so the output reparses to the same tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::Pred(p) => write!(f, "{p}"),
            Formula::Not(c) => write!(f, "not {}", Child(c)),
            Formula::And(l, r) => write!(f, "{} and {}", Child(l), Child(r)),
            Formula::Or(l, r) => write!(f, "{} or {}", Child(l), Child(r)),
            Formula::Eventually(i, c) => write!(f, "F{i} {}", Child(c)),
            Formula::Always(i, c) => write!(f, "G{i} {}", Child(c)),
            Formula::Until(i, l, r) => write!(f, "{} U{i} {}", Child(l), Child(r)),
        }
    }
}
