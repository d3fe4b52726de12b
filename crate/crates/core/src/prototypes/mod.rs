//! Class prototypes and the distortion losses that tie their pairwise
//! distances to a class-distance matrix.

mod distortion;
mod fit;
pub(crate) mod io;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::FormatError;
use crate::geometry::{kernels, Curvature, GeometryError, Space};

pub use distortion::{disto_loss, disto_loss_at_scale, disto_loss_grad, distortion, optimal_scale, pairwise_distances, DistortionReport};
pub use fit::{fit_prototypes, init_prototypes, FitConfig};

#[derive(Debug, Error)]
pub enum PrototypeError {
    #[error("{prototypes} prototypes but the distance matrix has {classes} classes")]
    SizeMismatch { prototypes: usize, classes: usize },
    #[error("target distance D[{i},{j}] is zero")]
    ZeroTargetDistance { i: usize, j: usize },
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("all prototype distances are zero; the optimal scale is undefined")]
    Degenerate,
    #[error("invalid config `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, PrototypeError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Hyperbolic,
    Euclidean,
}

impl Mode {
    pub fn space(self, c: Curvature) -> Space {
        match self {
            Mode::Hyperbolic => Space::Poincare(c),
            Mode::Euclidean => Space::Euclidean,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "hyperbolic" => Ok(Mode::Hyperbolic),
            "euclidean" => Ok(Mode::Euclidean),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// One prototype per class, stored row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    points: Array2<f64>,
    labels: Vec<String>,
    space: Space,
}

impl PrototypeSet {
    /// Validates shapes and, in the ball, the margin invariant.
    pub fn new(points: Array2<f64>, labels: Vec<String>, space: Space) -> Result<Self> {
        if labels.len() != points.nrows() {
            return Err(PrototypeError::SizeMismatch {
                prototypes: points.nrows(),
                classes: labels.len(),
            });
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite.into());
        }
        let points = points.as_standard_layout().into_owned();
        if let Space::Poincare(c) = space {
            for row in points.rows() {
                let scaled = c.sqrt() * kernels::norm(row.as_slice().expect("contiguous"));
                if scaled > 1.0 - crate::geometry::BALL_EPS {
                    return Err(GeometryError::OutsideBall { scaled_norm: scaled }.into());
                }
            }
        }
        Ok(Self { points, labels, space })
    }

    pub(crate) fn from_parts_unchecked(points: Array2<f64>, labels: Vec<String>, space: Space) -> Self {
        Self { points, labels, space }
    }

    pub fn num_classes(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn mode(&self) -> Mode {
        match self.space {
            Space::Poincare(_) => Mode::Hyperbolic,
            Space::Euclidean => Mode::Euclidean,
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn point(&self, k: usize) -> &[f64] {
        self.points.row(k).to_slice().expect("standard layout")
    }

    pub(crate) fn point_mut(&mut self, k: usize) -> &mut [f64] {
        self.points.row_mut(k).into_slice().expect("standard layout")
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.space.distance(self.point(i), self.point(j))
    }
}
