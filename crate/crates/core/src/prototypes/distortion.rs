use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{PrototypeError, PrototypeSet, Result};
use crate::hierarchy::ClassDistanceMatrix;

/// Summary of how well prototype distances reproduce a class-distance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    /// Mean relative error `|d - D| / D` over ordered pairs.
    pub raw_distortion: f64,
    /// Closed-form optimal scale `s*`.
    pub scale: f64,
    /// Mean squared scaled residual `((s* d - D) / D)^2`.
    pub surrogate_loss: f64,
}

impl DistortionReport {
    pub fn compute(p: &PrototypeSet, d: &ClassDistanceMatrix) -> Result<Self> {
        Ok(Self {
            raw_distortion: distortion(p, d)?,
            scale: optimal_scale(p, d)?,
            surrogate_loss: disto_loss(p, d)?,
        })
    }
}

fn check(p: &PrototypeSet, d: &ClassDistanceMatrix) -> Result<usize> {
    let k = p.num_classes();
    if d.num_classes() != k {
        return Err(PrototypeError::SizeMismatch {
            prototypes: k,
            classes: d.num_classes(),
        });
    }
    if k < 2 {
        return Err(PrototypeError::TooFewClasses(k));
    }
    for i in 0..k {
        for j in 0..k {
            if i != j && d.get(i, j) <= 0.0 {
                return Err(PrototypeError::ZeroTargetDistance { i, j });
            }
        }
    }
    Ok(k)
}

/// Symmetric matrix of prototype distances, filled in a fixed order.
pub fn pairwise_distances(p: &PrototypeSet) -> Array2<f64> {
    let k = p.num_classes();
    let mut m = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..i {
            let v = p.distance(i, j);
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    m
}

/// Iterates `(i, j, d_ij, D_ij)` over unordered pairs `j < i`.
fn pairs<'a>(dist: &'a Array2<f64>, target: &'a ClassDistanceMatrix) -> impl Iterator<Item = (usize, usize, f64, f64)> + 'a {
    let k = dist.nrows();
    (0..k).flat_map(move |i| (0..i).map(move |j| (i, j, dist[[i, j]], target.get(i, j))))
}

fn norm(k: usize) -> f64 {
    1.0 / (k * (k - 1)) as f64
}

/// Mean relative distortion over ordered pairs `i != j`.
pub fn distortion(p: &PrototypeSet, d: &ClassDistanceMatrix) -> Result<f64> {
    let k = check(p, d)?;
    let dist = pairwise_distances(p);
    let sum: f64 = pairs(&dist, d).map(|(_, _, x, t)| (x - t).abs() / t).sum();
    Ok(2.0 * sum * norm(k))
}

fn scale_from(dist: &Array2<f64>, d: &ClassDistanceMatrix) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (_, _, x, t) in pairs(dist, d) {
        let r = x / t;
        num += r;
        den += r * r;
    }
    if den == 0.0 {
        return Err(PrototypeError::Degenerate);
    }
    Ok(num / den)
}

/// Scale `s* = Σ d/D / Σ (d/D)^2` minimizing the surrogate loss.
pub fn optimal_scale(p: &PrototypeSet, d: &ClassDistanceMatrix) -> Result<f64> {
    check(p, d)?;
    scale_from(&pairwise_distances(p), d)
}

/// Surrogate loss at a given scale (not necessarily optimal).
pub fn disto_loss_at_scale(p: &PrototypeSet, d: &ClassDistanceMatrix, s: f64) -> Result<f64> {
    let k = check(p, d)?;
    let dist = pairwise_distances(p);
    let sum: f64 = pairs(&dist, d)
        .map(|(_, _, x, t)| {
            let r = (s * x - t) / t;
            r * r
        })
        .sum();
    Ok(2.0 * sum * norm(k))
}

/// Surrogate distortion loss at the optimal scale.
pub fn disto_loss(p: &PrototypeSet, d: &ClassDistanceMatrix) -> Result<f64> {
    let s = optimal_scale(p, d)?;
    disto_loss_at_scale(p, d, s)
}

/// Loss and per-prototype gradient (rows of the returned matrix).
///
/// `s*` is held fixed: at the inner optimum `∂L/∂s = 0`, so the path through
/// the scale contributes nothing.
pub fn disto_loss_grad(p: &PrototypeSet, d: &ClassDistanceMatrix) -> Result<(f64, Array2<f64>)> {
    let k = check(p, d)?;
    let dist = pairwise_distances(p);
    let s = scale_from(&dist, d)?;
    let space = p.space();
    let n = p.dim();
    let mut grad = Array2::<f64>::zeros((k, n));
    let mut loss = 0.0;
    let mut gi = vec![0.0; n];
    let mut gj = vec![0.0; n];
    for (i, j, x, t) in pairs(&dist, d) {
        let r = (s * x - t) / t;
        loss += r * r;
        // both ordered pairs, each contributing 2 r s / D
        let coef = 4.0 * r * s / t * norm(k);
        gi.iter_mut().for_each(|g| *g = 0.0);
        gj.iter_mut().for_each(|g| *g = 0.0);
        space.distance_grad(p.point(i), p.point(j), coef, &mut gi, &mut gj);
        for c in 0..n {
            grad[[i, c]] += gi[c];
            grad[[j, c]] += gj[c];
        }
    }
    Ok((2.0 * loss * norm(k), grad))
}
