//! Hierarchy-aware evaluation: accuracy, mistake severity and HD@k.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::Taxonomy;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {what} has {found} entries, expected {expected}")]
    LengthMismatch { what: &'static str, expected: usize, found: usize },
    #[error("class index {index} out of range for {classes} classes")]
    InvalidIndex { index: usize, classes: usize },
    #[error("row {row} has {found} predictions, need k = {k}")]
    TooFewPredictions { row: usize, found: usize, k: usize },
    #[error("k must be positive")]
    ZeroK,
    #[error("no samples to evaluate")]
    Empty,
    #[error("line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error("line {line}: unknown class label `{label}`")]
    UnknownLabel { line: usize, label: String },
}

pub type Result<T> = std::result::Result<T, MetricsError>;

fn same_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(MetricsError::LengthMismatch { what, expected, found })
    }
}

fn lcd(t: &Taxonomy, a: usize, b: usize) -> Result<usize> {
    let classes = t.num_classes();
    for index in [a, b] {
        if index >= classes {
            return Err(MetricsError::InvalidIndex { index, classes });
        }
    }
    Ok(t.class_distance(a, b).expect("indices checked"))
}

/// Fraction of predictions equal to the label.
pub fn accuracy(preds: &[usize], y: &[usize]) -> Result<f64> {
    same_len("predictions", y.len(), preds.len())?;
    if y.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = preds.iter().zip(y).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / y.len() as f64)
}

/// Mean LCA height over misclassified samples, and the number of mistakes.
/// The mean is `None` when there are no mistakes.
pub fn mistake_severity(preds: &[usize], y: &[usize], t: &Taxonomy) -> Result<(Option<f64>, usize)> {
    same_len("predictions", y.len(), preds.len())?;
    let (mut sum, mut count) = (0usize, 0usize);
    for (&p, &truth) in preds.iter().zip(y) {
        let h = lcd(t, p, truth)?;
        if p != truth {
            sum += h;
            count += 1;
        }
    }
    Ok(((count > 0).then(|| sum as f64 / count as f64), count))
}

/// Mean LCD distance between the truth and each of the first `k` ranked
/// predictions, averaged per sample and then over samples.
pub fn hd_at_k(topk: &[Vec<usize>], y: &[usize], t: &Taxonomy, k: usize) -> Result<f64> {
    same_len("top-k rows", y.len(), topk.len())?;
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    if y.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut total = 0.0;
    for (row, (ranked, &truth)) in topk.iter().zip(y).enumerate() {
        if ranked.len() < k {
            return Err(MetricsError::TooFewPredictions { row, found: ranked.len(), k });
        }
        let mut s = 0usize;
        for &p in &ranked[..k] {
            s += lcd(t, p, truth)?;
        }
        total += s as f64 / k as f64;
    }
    Ok(total / y.len() as f64)
}

/// Accuracy per class group; groups with no samples are omitted.
pub fn group_accuracy(preds: &[usize], y: &[usize], class_groups: &[String]) -> Result<BTreeMap<String, f64>> {
    same_len("predictions", y.len(), preds.len())?;
    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (&p, &truth) in preds.iter().zip(y) {
        let group = class_groups.get(truth).ok_or(MetricsError::InvalidIndex {
            index: truth,
            classes: class_groups.len(),
        })?;
        let e = tally.entry(group.clone()).or_default();
        e.0 += usize::from(p == truth);
        e.1 += 1;
    }
    Ok(tally.into_iter().map(|(g, (hit, n))| (g, hit as f64 / n as f64)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: usize,
    pub accuracy: f64,
    pub mistake_severity: Option<f64>,
    pub mistakes: usize,
    pub k: usize,
    pub hd_at_k: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub group_accuracy: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_hash: Option<String>,
}

impl EvalReport {
    /// Scores ranked predictions; the first column is the top-1 prediction.
    pub fn compute(topk: &[Vec<usize>], y: &[usize], t: &Taxonomy, k: usize) -> Result<Self> {
        let hd = hd_at_k(topk, y, t, k)?;
        let top1: Vec<usize> = topk.iter().map(|r| r[0]).collect();
        let (ms, mistakes) = mistake_severity(&top1, y, t)?;
        Ok(Self {
            samples: y.len(),
            accuracy: accuracy(&top1, y)?,
            mistake_severity: ms,
            mistakes,
            k,
            hd_at_k: hd,
            group_accuracy: None,
            config_hash: None,
        })
    }
}

/// Ranked predictions by label, as stored in prediction files.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Predictions {
    pub sample_ids: Vec<String>,
    pub truth: Vec<String>,
    pub ranked: Vec<Vec<String>>,
}

impl Predictions {
    pub fn from_indices(topk: &[Vec<usize>], y: &[usize], classes: &[String]) -> Self {
        Self {
            sample_ids: (0..y.len()).map(|i| i.to_string()).collect(),
            truth: y.iter().map(|&i| classes[i].clone()).collect(),
            ranked: topk.iter().map(|r| r.iter().map(|&i| classes[i].clone()).collect()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    /// Number of ranked columns (the smallest row width).
    pub fn k(&self) -> usize {
        self.ranked.iter().map(Vec::len).min().unwrap_or(0)
    }

    /// `sample_id,true_label,pred1..predk`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let k = self.k();
        let mut header = vec!["sample_id".to_string(), "true_label".to_string()];
        header.extend((1..=k).map(|i| format!("pred{i}")));
        out.write_record(&header)?;
        for ((id, t), r) in self.sample_ids.iter().zip(&self.truth).zip(&self.ranked) {
            let mut rec = vec![id.as_str(), t.as_str()];
            rec.extend(r[..k].iter().map(String::as_str));
            out.write_record(&rec)?;
        }
        out.flush()
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
        let mut records = rdr.records();
        let header = match records.next() {
            Some(h) => h.map_err(|e| MetricsError::Csv { line: 1, reason: e.to_string() })?,
            None => return Err(MetricsError::Csv { line: 1, reason: "missing header".into() }),
        };
        if header.len() < 3 || &header[0] != "sample_id" || &header[1] != "true_label" {
            return Err(MetricsError::Csv {
                line: 1,
                reason: "expected header `sample_id,true_label,pred1..predk`".into(),
            });
        }
        let width = header.len();
        let mut p = Predictions::default();
        for (i, rec) in records.enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| MetricsError::Csv { line, reason: e.to_string() })?;
            if rec.len() != width {
                return Err(MetricsError::Csv {
                    line,
                    reason: format!("expected {width} fields, found {}", rec.len()),
                });
            }
            p.sample_ids.push(rec[0].to_string());
            p.truth.push(rec[1].to_string());
            p.ranked.push(rec.iter().skip(2).map(str::to_string).collect());
        }
        Ok(p)
    }

    /// Resolves labels to class indices of `t`; errors name the file line.
    pub fn to_indices(&self, t: &Taxonomy) -> Result<(Vec<Vec<usize>>, Vec<usize>)> {
        let index = |line: usize, label: &str| {
            t.class_index(label).ok_or_else(|| MetricsError::UnknownLabel {
                line,
                label: label.to_string(),
            })
        };
        let mut y = Vec::with_capacity(self.len());
        let mut topk = Vec::with_capacity(self.len());
        for (i, (truth, ranked)) in self.truth.iter().zip(&self.ranked).enumerate() {
            y.push(index(i + 2, truth)?);
            topk.push(ranked.iter().map(|l| index(i + 2, l)).collect::<Result<Vec<_>>>()?);
        }
        Ok((topk, y))
    }
}

/// Reads a `label,group` file into one group name per class of `t`.
/// Classes missing from the file fall into the group `other`.
pub fn read_groups<R: Read>(r: R, t: &Taxonomy) -> Result<Vec<String>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut groups = vec!["other".to_string(); t.num_classes()];
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| MetricsError::Csv { line, reason: e.to_string() })?;
        if rec.len() != 2 {
            return Err(MetricsError::Csv { line, reason: "expected `label,group`".into() });
        }
        let k = t.class_index(&rec[0]).ok_or_else(|| MetricsError::UnknownLabel {
            line,
            label: rec[0].to_string(),
        })?;
        groups[k] = rec[1].to_string();
    }
    Ok(groups)
}
