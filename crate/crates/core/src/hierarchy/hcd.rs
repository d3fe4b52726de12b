//! Hyperbolic class distance: embed every taxonomy node in a Poincaré ball
//! with a contrastive objective, then read off leaf-to-leaf distances.

use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ClassDistanceMatrix, Encoding, Result, Taxonomy, TaxonomyError};
use crate::geometry::{kernels, riemannian_step, BallPoint, Curvature};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HcdConfig {
    pub n_embed: usize,
    pub curvature: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub burn_in_epochs: usize,
    pub burn_in_learning_rate: f64,
    pub negatives: usize,
    pub init_radius: f64,
    pub seed: u64,
}

impl Default for HcdConfig {
    fn default() -> Self {
        Self {
            n_embed: 10,
            curvature: 1.0,
            epochs: 300,
            learning_rate: 0.05,
            burn_in_epochs: 10,
            burn_in_learning_rate: 0.005,
            negatives: 10,
            init_radius: 0.001,
            seed: 0,
        }
    }
}

/// Ball coordinates for every taxonomy node, in node order.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbedding {
    pub labels: Vec<String>,
    pub points: Vec<BallPoint>,
}

impl NodeEmbedding {
    /// CSV with header `label,x1..xn`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let n = self.points.first().map_or(0, BallPoint::dim);
        let mut header = vec!["label".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        out.write_record(&header)?;
        for (l, p) in self.labels.iter().zip(&self.points) {
            let mut row = vec![l.clone()];
            row.extend(p.coords().iter().map(f64::to_string));
            out.write_record(&row)?;
        }
        out.flush()
    }
}

#[derive(Debug, Clone)]
pub struct HcdOutcome {
    pub matrix: ClassDistanceMatrix,
    pub embedding: NodeEmbedding,
    /// Mean contrastive loss over the last epoch.
    pub final_objective: f64,
    /// Per-epoch mean contrastive loss.
    pub history: Vec<f64>,
    /// False when the objective was still moving by more than 1% over the
    /// last tenth of training.
    pub converged: bool,
}

fn validate(cfg: &HcdConfig) -> Result<Curvature> {
    let bad = |reason: &str| TaxonomyError::InvalidConfig(reason.to_string());
    if cfg.n_embed == 0 {
        return Err(bad("n_embed must be positive"));
    }
    if !(cfg.learning_rate > 0.0 && cfg.burn_in_learning_rate > 0.0) {
        return Err(bad("learning rates must be positive"));
    }
    if !(cfg.init_radius > 0.0) {
        return Err(bad("init_radius must be positive"));
    }
    let c = Curvature::new(cfg.curvature).map_err(|e| bad(&e.to_string()))?;
    if cfg.init_radius >= c.max_norm() {
        return Err(bad("init_radius must lie inside the ball"));
    }
    Ok(c)
}

/// Learns a ball embedding of all nodes and returns leaf-pair distances.
///
/// For each directed tree edge `(u, v)` with sampled non-neighbours `N(u)`
/// the loss is `d(u,v) + log Σ_{w ∈ {v} ∪ N(u)} exp(-d(u,w))`; each sample
/// takes one Riemannian SGD step on every point involved.
pub fn hcd_encode(t: &Taxonomy, cfg: &HcdConfig) -> Result<HcdOutcome> {
    let c = validate(cfg)?;
    let cv = c.value();
    let n = t.len();
    let dim = cfg.n_embed;

    let mut init = rng::stream(cfg.seed, Stream::HcdInit);
    let mut pts: Vec<Vec<f64>> = (0..n)
        .map(|_| rng::uniform_in_ball(&mut init, dim, cfg.init_radius))
        .collect();

    let mut edges = Vec::new();
    let mut adjacent = vec![vec![false; n]; n];
    for v in 0..n {
        if let Some(p) = t.parent(super::NodeId(v)) {
            edges.push((v, p.0));
            edges.push((p.0, v));
            adjacent[v][p.0] = true;
            adjacent[p.0][v] = true;
        }
    }
    let candidates: Vec<Vec<usize>> = (0..n)
        .map(|u| (0..n).filter(|&w| w != u && !adjacent[u][w]).collect())
        .collect();

    let mut sampler = rng::stream(cfg.seed, Stream::HcdSampling);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut group: Vec<usize> = Vec::with_capacity(cfg.negatives + 1);
    let mut dists = Vec::with_capacity(cfg.negatives + 1);
    let mut gu = vec![0.0; dim];
    let mut gw = vec![0.0; dim];

    for epoch in 0..cfg.epochs {
        let lr = if epoch < cfg.burn_in_epochs {
            cfg.burn_in_learning_rate
        } else {
            cfg.learning_rate
        };
        edges.shuffle(&mut sampler);
        let mut total = 0.0;
        for &(u, v) in &edges {
            group.clear();
            group.push(v);
            let cand = &candidates[u];
            if !cand.is_empty() {
                for _ in 0..cfg.negatives {
                    group.push(cand[sampler.random_range(0..cand.len())]);
                }
            }
            dists.clear();
            dists.extend(group.iter().map(|&w| kernels::dist(&pts[u], &pts[w], cv)));
            let lse = log_sum_exp_neg(&dists);
            total += dists[0] + lse;

            // ∂L/∂d_w = [w is the positive] - softmax(-d)_w
            gu.iter_mut().for_each(|g| *g = 0.0);
            let mut grads: Vec<(usize, Vec<f64>)> = Vec::with_capacity(group.len());
            for (slot, (&w, &d)) in group.iter().zip(&dists).enumerate() {
                let p = (-d - lse).exp();
                let dl = if slot == 0 { 1.0 - p } else { -p };
                gw.iter_mut().for_each(|g| *g = 0.0);
                kernels::dist_grad(&pts[u], &pts[w], cv, dl, &mut gu, &mut gw);
                grads.push((w, gw.clone()));
            }
            riemannian_step(&mut pts[u], &gu, lr, cv);
            for (w, g) in grads {
                riemannian_step(&mut pts[w], &g, lr, cv);
            }
        }
        history.push(total / edges.len().max(1) as f64);
    }

    let final_objective = history.last().copied().unwrap_or(0.0);
    let window = (cfg.epochs / 10).max(1);
    let converged = history.len() <= window || {
        let earlier = history[history.len() - 1 - window];
        (earlier - final_objective).abs() <= 0.01 * final_objective.abs().max(1e-12)
    };

    let leaves: Vec<usize> = t.leaves().map(|l| l.0).collect();
    let k = leaves.len();
    let mut m = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..i {
            let d = kernels::dist(&pts[leaves[i]], &pts[leaves[j]], cv);
            m[[i, j]] = d;
            m[[j, i]] = d;
        }
    }
    let matrix = ClassDistanceMatrix::new(m, t.leaf_labels(), Encoding::Hcd)?;
    let embedding = NodeEmbedding {
        labels: t.labels().to_vec(),
        points: pts.into_iter().map(|p| BallPoint::from_raw(p, c)).collect(),
    };
    Ok(HcdOutcome {
        matrix,
        embedding,
        final_objective,
        history,
        converged,
    })
}

fn log_sum_exp_neg(d: &[f64]) -> f64 {
    let m = d.iter().copied().fold(f64::INFINITY, f64::min);
    -m + d.iter().map(|x| (m - x).exp()).sum::<f64>().ln()
}
