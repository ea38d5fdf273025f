//! Recursive-descent parser for the STL text syntax.
//!
//! ```text
//! formula := until
//! until   := or ( "U[" int "," int "]" or )?
//! or      := and ( "or" and )*
//! and     := unary ( "and" unary )*
//! unary   := "not" unary | "F[" int "," int "]" unary | "G[" int "," int "]" unary | atom
//! atom    := "true" | "(" formula ")" | "in(" num "," num "," num "," num ")" | pred
//! pred    := linexpr ( ">" | ">=" | "<" | "<=" ) linexpr
//! ```
//!
//! Variables are `x1 .. xn`. Strict and non-strict comparisons produce the
//! same predicate.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::formula::{rect_region, Formula, Interval, LinearPredicate};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected {found}, expected {expected}")]
    Unexpected { found: String, expected: String },
    #[error("unexpected character {0:?}")]
    BadChar(char),
    #[error("malformed number {0:?}")]
    BadNumber(String),
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("interval [{a},{b}] has a > b")]
    ReversedInterval { a: usize, b: usize },
    #[error("interval bound must be a nonnegative integer")]
    NegativeBound,
    #[error("interval bound {0:?} is not an integer")]
    NonIntegerBound(String),
    #[error("empty region in(...)")]
    EmptyRegion,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    Cmp(Cmp),
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cmp {
    Gt,
    Ge,
    Lt,
    Le,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "{s:?}"),
            Tok::Num(s) => write!(f, "number {s}"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::LBracket => write!(f, "'['"),
            Tok::RBracket => write!(f, "']'"),
            Tok::Comma => write!(f, "','"),
            Tok::Plus => write!(f, "'+'"),
            Tok::Minus => write!(f, "'-'"),
            Tok::Star => write!(f, "'*'"),
            Tok::Cmp(c) => write!(f, "comparator {c:?}"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(1, &mut i, &mut col);
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                advance(1, &mut i, &mut col);
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    let n = j - i;
                    advance(n, &mut i, &mut col);
                }
            }
            Tok::Num(chars[start..i].iter().collect())
        } else {
            let two = chars.get(i + 1).copied();
            let (tok, n) = match (c, two) {
                ('>', Some('=')) => (Tok::Cmp(Cmp::Ge), 2),
                ('<', Some('=')) => (Tok::Cmp(Cmp::Le), 2),
                ('>', _) => (Tok::Cmp(Cmp::Gt), 1),
                ('<', _) => (Tok::Cmp(Cmp::Lt), 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('[', _) => (Tok::LBracket, 1),
                (']', _) => (Tok::RBracket, 1),
                (',', _) => (Tok::Comma, 1),
                ('+', _) => (Tok::Plus, 1),
                ('-', _) => (Tok::Minus, 1),
                ('*', _) => (Tok::Star, 1),
                _ => {
                    return Err(ParseError {
                        line,
                        column: col,
                        kind: ParseErrorKind::BadChar(c),
                    })
                }
            };
            advance(n, &mut i, &mut col);
            tok
        };
        out.push(Spanned {
            tok,
            line: start_line,
            column: start_col,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

/// Linear expression under construction: sparse coefficients plus constant.
#[derive(Default)]
struct LinExpr {
    coeffs: BTreeMap<usize, f64>,
    constant: f64,
}

impl LinExpr {
    fn add_scaled(&mut self, other: LinExpr, sign: f64) {
        for (k, c) in other.coeffs {
            *self.coeffs.entry(k).or_insert(0.0) += sign * c;
        }
        self.constant += sign * other.constant;
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    dim: Option<usize>,
    max_var: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let idx = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, kind: ParseErrorKind) -> ParseError {
        let s = &self.toks[self.pos];
        ParseError {
            line: s.line,
            column: s.column,
            kind,
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        self.error_here(ParseErrorKind::Unexpected {
            found: self.peek().to_string(),
            expected: expected.to_string(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn is_temporal(&self, kw: &str) -> bool {
        self.is_keyword(kw) && *self.peek_at(1) == Tok::LBracket
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.or()?;
        if self.is_temporal("U") {
            self.bump();
            let i = self.interval()?;
            let rhs = self.or()?;
            return Ok(Formula::until(i, lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and()?;
        while self.is_keyword("or") {
            self.bump();
            let rhs = self.and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while self.is_keyword("and") {
            self.bump();
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        if self.is_keyword("not") {
            self.bump();
            return Ok(Formula::not(self.unary()?));
        }
        if self.is_temporal("F") {
            self.bump();
            let i = self.interval()?;
            return Ok(Formula::eventually(i, self.unary()?));
        }
        if self.is_temporal("G") {
            self.bump();
            let i = self.interval()?;
            return Ok(Formula::always(i, self.unary()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        if self.is_keyword("true") {
            self.bump();
            return Ok(Formula::True);
        }
        if *self.peek() == Tok::LParen {
            self.bump();
            let f = self.formula()?;
            self.expect(Tok::RParen, "')'")?;
            return Ok(f);
        }
        if self.is_keyword("in") && *self.peek_at(1) == Tok::LParen {
            return self.region();
        }
        self.predicate()
    }

    fn region(&mut self) -> Result<Formula, ParseError> {
        let at = self.pos;
        self.bump();
        self.expect(Tok::LParen, "'('")?;
        let mut vals = [0.0; 4];
        for (k, v) in vals.iter_mut().enumerate() {
            if k > 0 {
                self.expect(Tok::Comma, "','")?;
            }
            *v = self.signed_number()?;
        }
        self.expect(Tok::RParen, "')'")?;
        self.max_var = self.max_var.max(2);
        if matches!(self.dim, Some(d) if d < 2) {
            self.pos = at;
            return Err(self.error_here(ParseErrorKind::UnknownVariable("x2".into())));
        }
        rect_region(vals[0], vals[1], vals[2], vals[3], 2).map_err(|_| {
            let s = &self.toks[at];
            ParseError {
                line: s.line,
                column: s.column,
                kind: ParseErrorKind::EmptyRegion,
            }
        })
    }

    fn signed_number(&mut self) -> Result<f64, ParseError> {
        let mut sign = 1.0;
        while matches!(self.peek(), Tok::Minus | Tok::Plus) {
            if *self.peek() == Tok::Minus {
                sign = -sign;
            }
            self.bump();
        }
        match self.peek().clone() {
            Tok::Num(s) => {
                let v = self.number_value(&s)?;
                self.bump();
                Ok(sign * v)
            }
            _ => Err(self.unexpected("number")),
        }
    }

    fn number_value(&self, s: &str) -> Result<f64, ParseError> {
        s.parse::<f64>()
            .map_err(|_| self.error_here(ParseErrorKind::BadNumber(s.to_string())))
    }

    fn bound(&mut self) -> Result<usize, ParseError> {
        match self.peek().clone() {
            Tok::Minus => Err(self.error_here(ParseErrorKind::NegativeBound)),
            Tok::Num(s) => {
                let v = s
                    .parse::<usize>()
                    .map_err(|_| self.error_here(ParseErrorKind::NonIntegerBound(s.clone())))?;
                self.bump();
                Ok(v)
            }
            _ => Err(self.unexpected("interval bound")),
        }
    }

    fn interval(&mut self) -> Result<Interval, ParseError> {
        let open = self.pos;
        self.expect(Tok::LBracket, "'['")?;
        let a = self.bound()?;
        self.expect(Tok::Comma, "','")?;
        let b = self.bound()?;
        self.expect(Tok::RBracket, "']'")?;
        Interval::new(a, b).map_err(|_| {
            let s = &self.toks[open];
            ParseError {
                line: s.line,
                column: s.column,
                kind: ParseErrorKind::ReversedInterval { a, b },
            }
        })
    }

    fn variable_index(&self, name: &str) -> Result<usize, ParseError> {
        let idx = name
            .strip_prefix('x')
            .filter(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
            .and_then(|rest| rest.parse::<usize>().ok())
            .filter(|&k| k >= 1);
        match (idx, self.dim) {
            (Some(k), Some(d)) if k > d => Err(self.error_here(ParseErrorKind::UnknownVariable(name.to_string()))),
            (Some(k), _) => Ok(k - 1),
            (None, _) => Err(self.error_here(ParseErrorKind::UnknownVariable(name.to_string()))),
        }
    }

    fn term(&mut self) -> Result<LinExpr, ParseError> {
        let mut sign = 1.0;
        while matches!(self.peek(), Tok::Minus | Tok::Plus) {
            if *self.peek() == Tok::Minus {
                sign = -sign;
            }
            self.bump();
        }
        let mut out = LinExpr::default();
        match self.peek().clone() {
            Tok::Num(s) => {
                let v = sign * self.number_value(&s)?;
                self.bump();
                let has_star = *self.peek() == Tok::Star;
                if has_star {
                    self.bump();
                }
                match self.peek().clone() {
                    Tok::Ident(name) if !is_reserved(&name) => {
                        let k = self.variable_index(&name)?;
                        self.bump();
                        self.max_var = self.max_var.max(k + 1);
                        out.coeffs.insert(k, v);
                    }
                    _ if has_star => return Err(self.unexpected("variable")),
                    _ => out.constant = v,
                }
            }
            Tok::Ident(name) if !is_reserved(&name) => {
                let k = self.variable_index(&name)?;
                self.bump();
                self.max_var = self.max_var.max(k + 1);
                out.coeffs.insert(k, sign);
            }
            _ => return Err(self.unexpected("predicate, 'true', '(' or temporal operator")),
        }
        Ok(out)
    }

    fn linexpr(&mut self) -> Result<LinExpr, ParseError> {
        let mut acc = self.term()?;
        loop {
            let sign = match self.peek() {
                Tok::Plus => 1.0,
                Tok::Minus => -1.0,
                _ => break,
            };
            self.bump();
            let t = self.term()?;
            acc.add_scaled(t, sign);
        }
        Ok(acc)
    }

    fn predicate(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.linexpr()?;
        let cmp = match self.peek() {
            Tok::Cmp(c) => *c,
            _ => return Err(self.unexpected("comparator")),
        };
        self.bump();
        let rhs = self.linexpr()?;
        // h = lhs - rhs for > / >=, rhs - lhs for < / <=.
        let (mut pos, neg) = match cmp {
            Cmp::Gt | Cmp::Ge => (lhs, rhs),
            Cmp::Lt | Cmp::Le => (rhs, lhs),
        };
        pos.add_scaled(neg, -1.0);
        let width = pos.coeffs.keys().next_back().map_or(0, |k| k + 1);
        let mut coeffs = vec![0.0; width];
        for (k, c) in pos.coeffs {
            coeffs[k] = c;
        }
        Ok(Formula::Pred(LinearPredicate::new(coeffs, pos.constant)))
    }
}

fn is_reserved(word: &str) -> bool {
    matches!(word, "true" | "and" | "or" | "not" | "in" | "F" | "G" | "U")
}

fn run(text: &str, dim: Option<usize>) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        dim,
        max_var: 0,
    };
    let mut f = p.formula()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("end of input"));
    }
    let width = dim.unwrap_or(p.max_var.max(1));
    f.pad_predicates(width);
    Ok(f)
}

/// Parses a formula, sizing predicates to the largest variable index used
/// (at least 1, at least 2 when `in(...)` appears).
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    run(text, None)
}

/// Parses a formula over an `dim`-dimensional state; variables beyond `x{dim}`
/// are rejected.
pub fn parse_with_dim(text: &str, dim: usize) -> Result<Formula, ParseError> {
    run(text, Some(dim))
}
