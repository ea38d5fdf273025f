//! Text formats.
//!
//! Dataset: one record per line,
//! `center <TAB> k_1,..,k_P <TAB> rho_center <TAB> rho_k1,..,rho_kP`.
//! Embedding: a header line `M N`, then `M` rows of `N` space-separated
//! numbers. In both, lines starting with `#` are comments. Numbers are
//! written with Rust's shortest round-trip formatting, so reading back is
//! exact.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use crate::diffgraph::Tensor;

use super::{EmbeddingModel, SkipGramRecord};

fn bad(line: usize, msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {}", msg.into()))
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

pub fn write_dataset<W: Write>(mut out: W, records: &[SkipGramRecord], comments: &[String]) -> io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.center,
            join(&r.context),
            r.rho_center,
            join(&r.rho_context)
        )?;
    }
    Ok(())
}

fn content_lines<R: BufRead>(input: R) -> impl Iterator<Item = (usize, io::Result<String>)> {
    input.lines().enumerate().filter_map(|(k, l)| match l {
        Ok(s) if s.trim().is_empty() || s.starts_with('#') => None,
        other => Some((k + 1, other)),
    })
}

fn parse_list<T: std::str::FromStr>(s: &str, line: usize) -> io::Result<Vec<T>> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| bad(line, format!("bad value {p:?}"))))
        .collect()
}

pub fn read_dataset<R: BufRead>(input: R) -> io::Result<Vec<SkipGramRecord>> {
    let mut out = Vec::new();
    for (line, text) in content_lines(input) {
        let text = text?;
        let cols: Vec<&str> = text.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad(
                line,
                format!("expected 4 tab-separated columns, found {}", cols.len()),
            ));
        }
        let center = cols[0].trim().parse().map_err(|_| bad(line, "bad center index"))?;
        let context: Vec<usize> = parse_list(cols[1], line)?;
        let rho_center = cols[2].trim().parse().map_err(|_| bad(line, "bad robustness"))?;
        let rho_context: Vec<f64> = parse_list(cols[3], line)?;
        if context.len() != rho_context.len() {
            return Err(bad(line, "context and robustness lists differ in length"));
        }
        out.push(SkipGramRecord {
            center,
            context,
            rho_center,
            rho_context,
        });
    }
    Ok(out)
}

/// Writes `w_in` only; `w_out` is not needed downstream.
pub fn write_embedding<W: Write>(mut out: W, model: &EmbeddingModel, comments: &[String]) -> io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let w = model.w_in();
    writeln!(out, "{} {}", w.rows(), w.cols())?;
    for i in 0..w.rows() {
        let mut line = String::new();
        for (k, v) in w.row(i).iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            write!(line, "{v}").unwrap();
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads an embedding matrix. The returned model carries a zero `w_out`.
pub fn read_embedding<R: BufRead>(input: R) -> io::Result<EmbeddingModel> {
    let mut lines = content_lines(input);
    let (hl, header) = lines.next().ok_or_else(|| bad(0, "missing header"))?;
    let header = header?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|p| p.parse().map_err(|_| bad(hl, "bad header")))
        .collect::<io::Result<_>>()?;
    let [m, n] = dims[..] else {
        return Err(bad(hl, "header must be `M N`"));
    };
    let mut data = Vec::with_capacity(m * n);
    for _ in 0..m {
        let (line, text) = lines.next().ok_or_else(|| bad(hl, format!("expected {m} rows")))?;
        let row: Vec<f64> = text?
            .split_whitespace()
            .map(|p| p.parse().map_err(|_| bad(line, format!("bad value {p:?}"))))
            .collect::<io::Result<_>>()?;
        if row.len() != n {
            return Err(bad(line, format!("expected {n} values, found {}", row.len())));
        }
        data.extend(row);
    }
    EmbeddingModel::new(Tensor::from_vec(m, n, data), Tensor::zeros(n, m))
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
}
