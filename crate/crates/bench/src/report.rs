//! Nearest-neighbor tables over learned specification vectors.

use std::fmt::Write as _;

use stl2vec::embedding::{nearest, EmbeddingError, EmbeddingModel};

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityRow {
    pub query: usize,
    /// `(spec, cosine)`, most similar first.
    pub neighbors: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTable {
    pub rows: Vec<SimilarityRow>,
}

/// The `k` most similar specs for each query. `names` must cover every row
/// of the model.
pub fn report_similarities(
    model: &EmbeddingModel,
    names: &[String],
    queries: &[usize],
    k: usize,
) -> Result<SimilarityTable, EmbeddingError> {
    if names.len() != model.num_specs() {
        return Err(EmbeddingError::NameCount {
            specs: model.num_specs(),
            names: names.len(),
        });
    }
    let rows = queries
        .iter()
        .map(|&q| {
            Ok(SimilarityRow {
                query: q,
                neighbors: nearest(model, q, k)?,
            })
        })
        .collect::<Result<_, EmbeddingError>>()?;
    Ok(SimilarityTable { rows })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl SimilarityTable {
    /// One line per (query, rank).
    pub fn to_csv(&self, names: &[String], comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            writeln!(out, "# {c}").unwrap();
        }
        out.push_str("query_index,query,rank,neighbor_index,neighbor,cosine\n");
        for row in &self.rows {
            for (rank, &(j, s)) in row.neighbors.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    row.query,
                    csv_field(&names[row.query]),
                    rank + 1,
                    j,
                    csv_field(&names[j]),
                    s
                )
                .unwrap();
            }
        }
        out
    }

    /// Query followed by its ranked neighbors, cosines to three decimals.
    pub fn to_text(&self, names: &[String]) -> String {
        let width = self
            .rows
            .iter()
            .flat_map(|r| r.neighbors.iter().map(|&(j, _)| names[j].len()))
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        for row in &self.rows {
            writeln!(out, "[{}] {}", row.query, names[row.query]).unwrap();
            for (rank, &(j, s)) in row.neighbors.iter().enumerate() {
                writeln!(out, "  {}. {:<width$}  {:.3}", rank + 1, names[j], s).unwrap();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use stl2vec::diffgraph::Tensor;

    fn model(rows: &[[f64; 2]]) -> EmbeddingModel {
        let data = rows.iter().flatten().copied().collect();
        EmbeddingModel::new(Tensor::from_vec(rows.len(), 2, data), Tensor::zeros(2, rows.len())).unwrap()
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn matches_pairwise_cosines() {
        let rows = [[1.0, 0.0], [1.0, 1.0], [0.0, 2.0], [-1.0, 0.2], [3.0, 0.1]];
        let m = model(&rows);
        let t = report_similarities(&m, &names(5), &[0, 2], 4).unwrap();
        for row in &t.rows {
            let q = rows[row.query];
            let mut want: Vec<(usize, f64)> = (0..5)
                .filter(|&j| j != row.query)
                .map(|j| {
                    let r = rows[j];
                    let c = (q[0] * r[0] + q[1] * r[1]) / (q[0].hypot(q[1]) * r[0].hypot(r[1]));
                    (j, c)
                })
                .collect();
            want.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            assert_eq!(row.neighbors.len(), 4);
            for (got, want) in row.neighbors.iter().zip(&want) {
                assert_eq!(got.0, want.0);
                assert!((got.1 - want.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn k_one_and_self_excluded() {
        let m = model(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let t = report_similarities(&m, &names(3), &[0, 1, 2], 1).unwrap();
        assert_eq!(t.rows[0].neighbors, vec![(1, 1.0)]);
        assert_eq!(t.rows[1].neighbors, vec![(0, 1.0)]);
        assert_eq!(t.rows[2].neighbors.len(), 1);
        assert!(t.rows.iter().all(|r| r.neighbors.iter().all(|&(j, _)| j != r.query)));
    }

    #[test]
    fn rejects_bad_requests() {
        let m = model(&[[1.0, 0.0], [0.0, 1.0]]);
        assert!(report_similarities(&m, &names(3), &[0], 1).is_err());
        assert!(report_similarities(&m, &names(2), &[0], 2).is_err());
        assert!(report_similarities(&m, &names(2), &[5], 1).is_err());
    }

    #[test]
    fn renderings() {
        let m = model(&[[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let n = vec!["a".to_string(), "b, c".to_string(), "d".to_string()];
        let t = report_similarities(&m, &n, &[0], 2).unwrap();
        let csv = t.to_csv(&n, &["seed 1".into()]);
        assert!(csv.starts_with("# seed 1\nquery_index,"));
        assert!(csv.contains("0,a,1,1,\"b, c\","));
        let text = t.to_text(&n);
        assert!(text.starts_with("[0] a\n  1. b, c  0.707\n  2. d     0.000\n"));
    }
}
