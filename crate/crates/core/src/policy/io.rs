//! Checkpoint and training-log formats.
//!
//! Checkpoint: a `stl2vec-policy 1` header, `key value..` lines for the
//! architecture, encoding kind and input bounds, then each parameter tensor as
//! a `name rows cols` line followed by one line of row-major values, in
//! [`LstmPolicy::param_names`] order.
//!
//! Training log: CSV with `epoch,wall_seconds,mean_robustness,spec_0,..`.
//! Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use crate::diffgraph::Tensor;

use super::{EvalRecord, LstmPolicy, TrainingLog};

const MAGIC: &str = "stl2vec-policy";
const VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn spaced(xs: &[f64]) -> String {
    let mut s = String::new();
    for (k, v) in xs.iter().enumerate() {
        if k > 0 {
            s.push(' ');
        }
        write!(s, "{v}").unwrap();
    }
    s
}

pub fn write_checkpoint<W: Write>(
    mut out: W,
    policy: &LstmPolicy,
    encoding: &str,
    comments: &[String],
) -> io::Result<()> {
    writeln!(out, "{MAGIC} {VERSION}")?;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "state_dim {}", policy.state_dim())?;
    writeln!(out, "enc_dim {}", policy.enc_dim())?;
    writeln!(out, "hidden {}", policy.hidden())?;
    writeln!(out, "layers {}", policy.layers())?;
    writeln!(out, "encoding {encoding}")?;
    writeln!(out, "u_lo {}", spaced(policy.lower()))?;
    writeln!(out, "u_hi {}", spaced(policy.upper()))?;
    for (name, t) in policy.param_names().iter().zip(policy.params()) {
        writeln!(out, "{name} {} {}", t.rows(), t.cols())?;
        writeln!(out, "{}", spaced(t.data()))?;
    }
    Ok(())
}

/// Returns the policy and the recorded encoding kind.
pub fn read_checkpoint<R: BufRead>(input: R) -> io::Result<(LstmPolicy, String)> {
    let all: Vec<String> = input
        .lines()
        .filter(|l| !matches!(l, Ok(s) if s.starts_with('#') || s.trim().is_empty()))
        .collect::<io::Result<_>>()?;
    let mut lines = all.into_iter();
    let mut next = move || lines.next().ok_or_else(|| bad("unexpected end of checkpoint"));
    let header = next()?;
    match header.split_whitespace().collect::<Vec<_>>()[..] {
        [MAGIC, v] if v == VERSION.to_string() => {}
        _ => return Err(bad(format!("not a version {VERSION} policy checkpoint"))),
    }
    let field = |next: &mut dyn FnMut() -> io::Result<String>, key: &str| -> io::Result<String> {
        let line = next()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest.to_string()),
            _ => Err(bad(format!("expected `{key}`, found {line:?}"))),
        }
    };
    let int = |s: String| s.trim().parse::<usize>().map_err(|_| bad(format!("bad integer {s:?}")));
    let floats = |s: &str| -> io::Result<Vec<f64>> {
        s.split_whitespace()
            .map(|p| p.parse().map_err(|_| bad(format!("bad number {p:?}"))))
            .collect()
    };
    let state_dim = int(field(&mut next, "state_dim")?)?;
    let enc_dim = int(field(&mut next, "enc_dim")?)?;
    let hidden = int(field(&mut next, "hidden")?)?;
    let layers = int(field(&mut next, "layers")?)?;
    let encoding = field(&mut next, "encoding")?.trim().to_string();
    let u_lo = floats(&field(&mut next, "u_lo")?)?;
    let u_hi = floats(&field(&mut next, "u_hi")?)?;
    let mut policy =
        LstmPolicy::zeros(state_dim, enc_dim, hidden, layers, u_lo, u_hi).map_err(|e| bad(e.to_string()))?;
    let mut params = Vec::new();
    for (name, expect) in policy.param_names().into_iter().zip(policy.params()) {
        let dims = field(&mut next, &name)?;
        let (r, c) = match dims.split_whitespace().collect::<Vec<_>>()[..] {
            [r, c] => (int(r.into())?, int(c.into())?),
            _ => return Err(bad(format!("bad shape line for {name}"))),
        };
        if (r, c) != expect.shape() {
            return Err(bad(format!("{name}: shape {r}x{c} does not match the header")));
        }
        let data = floats(&next()?)?;
        if data.len() != r * c {
            return Err(bad(format!("{name}: expected {} values, found {}", r * c, data.len())));
        }
        params.push(Tensor::from_vec(r, c, data));
    }
    policy.set_params(params).map_err(|e| bad(e.to_string()))?;
    Ok((policy, encoding))
}

pub fn write_training_log<W: Write>(mut out: W, log: &TrainingLog, comments: &[String]) -> io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let m = log.evals.first().map_or(0, |r| r.per_spec.len());
    let mut header = String::from("epoch,wall_seconds,mean_robustness");
    for i in 0..m {
        write!(header, ",spec_{i}").unwrap();
    }
    writeln!(out, "{header}")?;
    for r in &log.evals {
        let mut line = format!("{},{},{}", r.epoch, r.wall_seconds, r.mean);
        for v in &r.per_spec {
            write!(line, ",{v}").unwrap();
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_training_log<R: BufRead>(input: R) -> io::Result<Vec<EvalRecord>> {
    let mut out = Vec::new();
    let mut seen_header = false;
    for line in input.lines() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if !line.starts_with("epoch,wall_seconds,mean_robustness") {
                return Err(bad("missing training log header"));
            }
            seen_header = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 3 {
            return Err(bad(format!("short row {line:?}")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
        out.push(EvalRecord {
            epoch: cols[0].parse().map_err(|_| bad("bad epoch"))?,
            wall_seconds: num(cols[1])?,
            mean: num(cols[2])?,
            per_spec: cols[3..].iter().map(|s| num(s)).collect::<io::Result<_>>()?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip() {
        let p = LstmPolicy::new(3, 4, 5, 2, vec![0.0, -0.5], vec![1.0, 0.5], 7).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p, "onehot", &["seed 7".into()]).unwrap();
        let (q, kind) = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(q, p);
        assert_eq!(kind, "onehot");
        let text = String::from_utf8(buf).unwrap();
        assert!(read_checkpoint(text.replace("layers 2", "layers 3").as_bytes()).is_err());
        assert!(read_checkpoint(&b"stl2vec-policy 2\n"[..]).is_err());
    }

    #[test]
    fn log_round_trip() {
        let log = TrainingLog {
            evals: vec![
                EvalRecord {
                    epoch: 0,
                    wall_seconds: 0.01,
                    mean: -1.5,
                    per_spec: vec![-1.0, -2.0],
                },
                EvalRecord {
                    epoch: 10,
                    wall_seconds: 0.5,
                    mean: 0.25,
                    per_spec: vec![0.5, 0.0],
                },
            ],
            losses: vec![],
        };
        let mut buf = Vec::new();
        write_training_log(&mut buf, &log, &["hash abc".into()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("epoch,wall_seconds,mean_robustness,spec_0,spec_1\n0,0.01,-1.5,-1,-2\n"));
        assert_eq!(read_training_log(&buf[..]).unwrap(), log.evals);
    }
}
