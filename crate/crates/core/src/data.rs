//! Feature files and the built-in synthetic hierarchical benchmark.

use std::io::{Read, Write};

use ndarray::Array2;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::{Decoder, Encoder, FormatError};
use crate::hierarchy::{NodeId, Taxonomy};
use crate::rng::{self, Stream};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error("unknown class label `{0}`")]
    UnknownLabel(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("features have {found} columns, expected {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("non-finite feature value in row {0}")]
    NonFinite(usize),
    #[error("{0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

pub type Result<T> = std::result::Result<T, DataError>;

pub const MAGIC: &[u8; 8] = b"HPNFEATS";
pub const VERSION: u32 = 1;

/// Rows of features tagged with class labels, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub labels: Vec<String>,
    pub x: Array2<f64>,
}

/// Inputs with class indices resolved against a label order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch {
    pub x: Array2<f64>,
    pub y: Vec<usize>,
}

impl FeatureBatch {
    pub fn new(x: Array2<f64>, y: Vec<usize>) -> Self {
        Self { x, y }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        if let Some(i) = self.x.rows().into_iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(DataError::NonFinite(i));
        }
        if let Some(&label) = self.y.iter().find(|&&l| l >= classes) {
            return Err(DataError::LabelOutOfRange { label, classes });
        }
        Ok(())
    }

    /// Rows selected by `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select(ndarray::Axis(0), idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }
}

impl FeatureTable {
    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Resolves labels to class indices given the class order.
    pub fn to_batch(&self, classes: &[String]) -> Result<FeatureBatch> {
        let index: std::collections::HashMap<&str, usize> =
            classes.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let y = self
            .labels
            .iter()
            .map(|l| index.get(l.as_str()).copied().ok_or_else(|| DataError::UnknownLabel(l.clone())))
            .collect::<Result<Vec<_>>>()?;
        let batch = FeatureBatch { x: self.x.clone(), y };
        batch.validate(classes.len())?;
        Ok(batch)
    }

    /// CSV with header `label,f1..fp`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["label".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("f{i}")));
        out.write_record(&header)?;
        for (l, row) in self.labels.iter().zip(self.x.rows()) {
            let mut rec = vec![l.clone()];
            rec.extend(row.iter().map(f64::to_string));
            out.write_record(&rec)?;
        }
        out.flush()
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr
            .headers()
            .map_err(|e| DataError::Csv { line: 1, reason: e.to_string() })?
            .clone();
        if header.get(0) != Some("label") {
            return Err(DataError::Csv {
                line: 1,
                reason: "header must start with `label`".into(),
            });
        }
        let p = header.len() - 1;
        let mut labels = Vec::new();
        let mut data = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| DataError::Csv { line, reason: e.to_string() })?;
            if rec.len() != p + 1 {
                return Err(DataError::Csv {
                    line,
                    reason: format!("expected {} fields, found {}", p + 1, rec.len()),
                });
            }
            labels.push(rec[0].to_string());
            for f in rec.iter().skip(1) {
                let v: f64 = f.trim().parse().map_err(|_| DataError::Csv {
                    line,
                    reason: format!("cannot parse `{f}` as a number"),
                })?;
                if !v.is_finite() {
                    return Err(DataError::NonFinite(i));
                }
                data.push(v);
            }
        }
        let x = Array2::from_shape_vec((labels.len(), p), data).expect("row lengths checked");
        Ok(Self { labels, x })
    }

    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        let mut e = Encoder::new();
        e.u64(self.x.nrows() as u64).u32(self.dim() as u32);
        e.strs(&self.labels);
        e.f64s(self.x.as_standard_layout().as_slice().expect("standard layout"));
        e.finish(w, MAGIC, VERSION)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let (mut d, _) = Decoder::open(r, MAGIC, "feature", VERSION)?;
        let m = d.u64()? as usize;
        let p = d.u32()? as usize;
        let labels = d.strs()?;
        if labels.len() != m {
            return Err(FormatError::Invalid(format!("{} labels for {m} rows", labels.len())).into());
        }
        let x = Array2::from_shape_vec((m, p), d.f64s(m.saturating_mul(p))?)
            .map_err(|e| FormatError::Invalid(e.to_string()))?;
        d.done()?;
        Ok(Self { labels, x })
    }

    /// Reads either format, choosing by the binary magic.
    pub fn read_any(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(MAGIC) {
            Self::read_binary(bytes)
        } else {
            Self::read_csv(bytes)
        }
    }
}

/// Hierarchical Gaussian clusters over a balanced tree.
///
/// Node centres are drawn top-down: each child centre is its parent's
/// centre plus isotropic noise with the standard deviation of its level, so
/// sibling classes share most of their centre. Samples are a leaf centre
/// plus isotropic noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub branching: Vec<usize>,
    pub dim: usize,
    /// Per-level centre offsets, top level first; must match `branching`.
    pub level_scales: Vec<f64>,
    pub noise: f64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            branching: vec![2, 2, 3],
            dim: 8,
            level_scales: vec![2.0, 1.0, 0.5],
            noise: 0.6,
            train_per_class: 500,
            test_per_class: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub taxonomy: Taxonomy,
    pub train: FeatureTable,
    pub test: FeatureTable,
}

pub fn synthetic_benchmark(cfg: &SyntheticConfig) -> Result<SyntheticBenchmark> {
    if cfg.branching.is_empty() || cfg.branching.contains(&0) {
        return Err(DataError::InvalidConfig("branching must be non-empty and positive".into()));
    }
    if cfg.level_scales.len() != cfg.branching.len() {
        return Err(DataError::InvalidConfig("level_scales must have one entry per level".into()));
    }
    if cfg.dim == 0 || !(cfg.noise >= 0.0) || cfg.level_scales.iter().any(|s| !(*s >= 0.0)) {
        return Err(DataError::InvalidConfig("dim must be positive and scales non-negative".into()));
    }
    let taxonomy = Taxonomy::balanced(&cfg.branching);
    let mut rng = rng::stream(cfg.seed, Stream::Synthetic);
    let std = Normal::new(0.0, 1.0).expect("unit normal");

    // Node ids of a balanced tree are in breadth-first order, so parents
    // always precede children.
    let mut centres = vec![vec![0.0; cfg.dim]; taxonomy.len()];
    for v in 1..taxonomy.len() {
        let node = NodeId(v);
        let parent = taxonomy.parent(node).expect("non-root").0;
        let scale = cfg.level_scales[taxonomy.depth(node) - 1];
        centres[v] = (0..cfg.dim)
            .map(|i| centres[parent][i] + scale * std.sample(&mut rng))
            .collect();
    }

    let mut draw = |per_class: usize| {
        let k = taxonomy.num_classes();
        let mut labels = Vec::with_capacity(k * per_class);
        let mut x = Array2::zeros((k * per_class, cfg.dim));
        let mut row = 0;
        for _ in 0..per_class {
            for leaf in taxonomy.leaves() {
                labels.push(taxonomy.label(leaf).to_string());
                for i in 0..cfg.dim {
                    x[[row, i]] = centres[leaf.0][i] + cfg.noise * std.sample(&mut rng);
                }
                row += 1;
            }
        }
        FeatureTable { labels, x }
    };
    let train = draw(cfg.train_per_class);
    let test = draw(cfg.test_per_class);
    Ok(SyntheticBenchmark { taxonomy, train, test })
}
