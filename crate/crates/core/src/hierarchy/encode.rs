use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Result, Taxonomy, TaxonomyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    /// LCA-height class distance.
    Lcd,
    /// Distances between learned hyperbolic node embeddings.
    Hcd,
}

/// Symmetric `K x K` class dissimilarity matrix with zero diagonal and
/// strictly positive off-diagonal entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistanceMatrix {
    matrix: Array2<f64>,
    labels: Vec<String>,
    encoding: Encoding,
}

impl ClassDistanceMatrix {
    pub fn new(matrix: Array2<f64>, labels: Vec<String>, encoding: Encoding) -> Result<Self> {
        let k = matrix.nrows();
        let bad = |reason: String| TaxonomyError::Malformed { line: 0, reason };
        if matrix.ncols() != k || labels.len() != k {
            return Err(bad(format!(
                "matrix is {}x{} with {} labels",
                matrix.nrows(),
                matrix.ncols(),
                labels.len()
            )));
        }
        for i in 0..k {
            if matrix[[i, i]] != 0.0 {
                return Err(bad(format!("diagonal entry {i} is {}", matrix[[i, i]])));
            }
            for j in 0..i {
                let (a, b) = (matrix[[i, j]], matrix[[j, i]]);
                if !(a.is_finite() && a > 0.0) {
                    return Err(bad(format!("entry ({i},{j}) = {a} must be positive")));
                }
                if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Err(bad(format!("asymmetric entries ({i},{j}) = {a} vs {b}")));
                }
            }
        }
        Ok(Self {
            matrix,
            labels,
            encoding,
        })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[[i, j]]
    }

    /// Same matrix with every entry multiplied by `alpha > 0`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            matrix: &self.matrix * alpha,
            labels: self.labels.clone(),
            encoding: self.encoding,
        }
    }

    /// CSV with a `label` corner cell, leaf labels as header row and column.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["label".to_string()];
        header.extend(self.labels.iter().cloned());
        out.write_record(&header)?;
        for (i, l) in self.labels.iter().enumerate() {
            let mut row = vec![l.clone()];
            row.extend(self.matrix.row(i).iter().map(|v| v.to_string()));
            out.write_record(&row)?;
        }
        out.flush()
    }

    pub fn read_csv<R: Read>(r: R, encoding: Encoding) -> Result<Self> {
        let io = |e: csv::Error| TaxonomyError::Io(e.to_string());
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let labels: Vec<String> = rdr.headers().map_err(io)?.iter().skip(1).map(String::from).collect();
        let k = labels.len();
        let mut matrix = Array2::zeros((k, k));
        let mut rows = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(io)?;
            let line = i + 2;
            if i >= k || rec.len() != k + 1 {
                return Err(TaxonomyError::Malformed {
                    line,
                    reason: "distance matrix row has the wrong shape".into(),
                });
            }
            if rec[0] != labels[i] {
                return Err(TaxonomyError::Malformed {
                    line,
                    reason: format!("row label `{}` does not match column `{}`", &rec[0], labels[i]),
                });
            }
            for j in 0..k {
                matrix[[i, j]] = rec[j + 1].trim().parse().map_err(|_| TaxonomyError::Malformed {
                    line,
                    reason: format!("cannot parse `{}` as a number", &rec[j + 1]),
                })?;
            }
            rows += 1;
        }
        if rows != k {
            return Err(TaxonomyError::Malformed {
                line: rows + 1,
                reason: format!("expected {k} rows, found {rows}"),
            });
        }
        Self::new(matrix, labels, encoding)
    }
}

/// `D[i, j]` = height of the lowest common ancestor of leaves `i` and `j`.
pub fn lcd_encode(t: &Taxonomy) -> ClassDistanceMatrix {
    let k = t.num_classes();
    let mut m = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..i {
            let d = t.class_distance(i, j).expect("leaf indices are valid") as f64;
            m[[i, j]] = d;
            m[[j, i]] = d;
        }
    }
    ClassDistanceMatrix {
        matrix: m,
        labels: t.leaf_labels(),
        encoding: Encoding::Lcd,
    }
}
