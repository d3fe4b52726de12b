use ndarray::Array2;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{disto_loss_grad, DistortionReport, Mode, PrototypeError, PrototypeSet, Result};
use crate::geometry::{Curvature, Space};
use crate::hierarchy::ClassDistanceMatrix;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub mode: Mode,
    pub dim: usize,
    pub curvature: f64,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Hyperbolic,
            dim: 16,
            curvature: 0.01,
            steps: 1000,
            learning_rate: 0.5,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn space(&self) -> Result<Space> {
        let c = Curvature::new(self.curvature).map_err(|e| PrototypeError::InvalidConfig {
            field: "curvature",
            reason: e.to_string(),
        })?;
        Ok(self.mode.space(c))
    }

    pub fn validate(&self) -> Result<Space> {
        if self.dim == 0 {
            return Err(PrototypeError::InvalidConfig {
                field: "dim",
                reason: "must be positive".into(),
            });
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(PrototypeError::InvalidConfig {
                field: "learning_rate",
                reason: "must be a positive number".into(),
            });
        }
        self.space()
    }
}

/// Seeded initial prototypes: uniform in the ball of radius `0.1/sqrt(c)`,
/// or Gaussian with standard deviation 0.1 in Euclidean mode.
pub fn init_prototypes(labels: Vec<String>, dim: usize, space: Space, seed: u64) -> PrototypeSet {
    let k = labels.len();
    let mut rng = rng::stream(seed, Stream::Prototypes);
    let mut pts = Array2::zeros((k, dim));
    match space {
        Space::Poincare(c) => {
            for mut row in pts.rows_mut() {
                let v = rng::uniform_in_ball(&mut rng, dim, 0.1 / c.sqrt());
                row.iter_mut().zip(v).for_each(|(a, b)| *a = b);
            }
        }
        Space::Euclidean => {
            let normal = Normal::new(0.0, 0.1).expect("valid sigma");
            pts.iter_mut().for_each(|v| *v = normal.sample(&mut rng));
        }
    }
    PrototypeSet::from_parts_unchecked(pts, labels, space)
}

/// Gradient descent on the surrogate distortion loss alone.
///
/// Returns the fitted prototypes, the final report, and the per-step loss.
pub fn fit_prototypes(d: &ClassDistanceMatrix, cfg: &FitConfig) -> Result<(PrototypeSet, DistortionReport, Vec<f64>)> {
    let space = cfg.validate()?;
    let k = d.num_classes();
    if k < 2 {
        return Err(PrototypeError::TooFewClasses(k));
    }
    let mut p = init_prototypes(d.labels().to_vec(), cfg.dim, space, cfg.seed);
    let mut history = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let (loss, grad) = disto_loss_grad(&p, d)?;
        history.push(loss);
        for i in 0..k {
            let g = grad.row(i);
            space.step(p.point_mut(i), g.as_slice().expect("standard layout"), cfg.learning_rate);
        }
    }
    let report = DistortionReport::compute(&p, d)?;
    Ok((p, report, history))
}
