//! Poincaré-ball primitives.
//!
//! Points live in the open ball `{x : sqrt(c) |x| < 1}` of curvature
//! parameter `c > 0`. Every constructor and operation keeps results at least
//! [`BALL_EPS`] (in the unit-radius coordinate `sqrt(c) x`) away from the
//! boundary, so `artanh` arguments never reach 1.
//!
//! The typed API ([`BallPoint`], [`mobius_add`], [`distance`], ...) validates
//! shapes and curvatures. The training loops use the slice kernels in
//! [`kernels`] and their pullbacks in [`grad`] directly.

pub mod grad;
pub mod kernels;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kernels::BALL_EPS;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("curvature must be a finite positive number, got {0}")]
    InvalidCurvature(f64),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("curvature mismatch: {left} vs {right}")]
    CurvatureMismatch { left: f64, right: f64 },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("point with scaled norm {scaled_norm} lies outside the ball margin")]
    OutsideBall { scaled_norm: f64 },
    #[error("matrix has {cols} columns but the point has dimension {dim}")]
    ShapeMismatch { cols: usize, dim: usize },
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Ball curvature parameter `c > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Curvature(f64);

impl Curvature {
    pub fn new(c: f64) -> Result<Self> {
        if c.is_finite() && c > 0.0 {
            Ok(Self(c))
        } else {
            Err(GeometryError::InvalidCurvature(c))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn sqrt(self) -> f64 {
        self.0.sqrt()
    }

    /// Radius bound `(1 - BALL_EPS) / sqrt(c)` enforced on all points.
    #[inline]
    pub fn max_norm(self) -> f64 {
        kernels::max_norm(self.0)
    }
}

impl TryFrom<f64> for Curvature {
    type Error = GeometryError;
    fn try_from(c: f64) -> Result<Self> {
        Self::new(c)
    }
}

impl From<Curvature> for f64 {
    fn from(c: Curvature) -> f64 {
        c.0
    }
}

/// A point strictly inside the ball (with margin).
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint {
    coords: Vec<f64>,
    c: Curvature,
}

impl BallPoint {
    /// Validates an interior point; use [`project_to_ball`] to clip instead.
    pub fn new(coords: Vec<f64>, c: Curvature) -> Result<Self> {
        check_finite(&coords)?;
        let scaled = c.sqrt() * kernels::norm(&coords);
        if scaled > 1.0 - BALL_EPS {
            return Err(GeometryError::OutsideBall {
                scaled_norm: scaled,
            });
        }
        Ok(Self { coords, c })
    }

    pub fn origin(dim: usize, c: Curvature) -> Self {
        Self {
            coords: vec![0.0; dim],
            c,
        }
    }

    /// Wraps coordinates already known to satisfy the invariant.
    pub(crate) fn from_raw(coords: Vec<f64>, c: Curvature) -> Self {
        debug_assert!(c.sqrt() * kernels::norm(&coords) <= 1.0 - BALL_EPS + 1e-12);
        Self { coords, c }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn curvature(&self) -> Curvature {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        kernels::norm(&self.coords)
    }

    /// Möbius negation `-x`, which is the ⊕-inverse.
    pub fn neg(&self) -> Self {
        Self {
            coords: self.coords.iter().map(|v| -v).collect(),
            c: self.c,
        }
    }
}

/// An unconstrained tangent vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(pub Vec<f64>);

impl TangentVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        kernels::norm(&self.0)
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(GeometryError::NonFinite)
    }
}

fn check_pair(x: &BallPoint, y: &BallPoint) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(GeometryError::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    if x.c != y.c {
        return Err(GeometryError::CurvatureMismatch {
            left: x.c.value(),
            right: y.c.value(),
        });
    }
    Ok(())
}

/// Radially clips `coords` to the ball margin; interior points are unchanged.
pub fn project_to_ball(mut coords: Vec<f64>, c: Curvature) -> Result<BallPoint> {
    check_finite(&coords)?;
    kernels::project_in_place(&mut coords, c.value());
    Ok(BallPoint { coords, c })
}

/// Möbius addition `x ⊕_c y`.
pub fn mobius_add(x: &BallPoint, y: &BallPoint) -> Result<BallPoint> {
    check_pair(x, y)?;
    let mut out = vec![0.0; x.dim()];
    kernels::mobius_add(&x.coords, &y.coords, x.c.value(), &mut out);
    project_to_ball(out, x.c)
}

/// Geodesic distance in the ball.
pub fn distance(x: &BallPoint, y: &BallPoint) -> Result<f64> {
    check_pair(x, y)?;
    Ok(kernels::dist(&x.coords, &y.coords, x.c.value()))
}

/// Conformal factor `λ_x = 2 / (1 - c |x|^2)`.
pub fn conformal_factor(x: &BallPoint) -> f64 {
    kernels::lambda(&x.coords, x.c.value())
}

/// Exponential map at `base` (the origin when `None`).
pub fn exp_map(v: &TangentVector, base: Option<&BallPoint>, c: Curvature) -> Result<BallPoint> {
    check_finite(&v.0)?;
    let mut out = vec![0.0; v.0.len()];
    match base {
        None => kernels::exp0(&v.0, c.value(), &mut out),
        Some(b) => {
            if b.c != c {
                return Err(GeometryError::CurvatureMismatch {
                    left: b.c.value(),
                    right: c.value(),
                });
            }
            if b.dim() != v.0.len() {
                return Err(GeometryError::DimensionMismatch {
                    left: b.dim(),
                    right: v.0.len(),
                });
            }
            kernels::exp_map(&v.0, &b.coords, c.value(), &mut out)
        }
    }
    project_to_ball(out, c)
}

/// Logarithmic map at `base` (the origin when `None`).
pub fn log_map(x: &BallPoint, base: Option<&BallPoint>) -> Result<TangentVector> {
    let mut out = vec![0.0; x.dim()];
    match base {
        None => {
            let zero = vec![0.0; x.dim()];
            kernels::log_map(&x.coords, &zero, x.c.value(), &mut out);
        }
        Some(b) => {
            check_pair(x, b)?;
            kernels::log_map(&x.coords, &b.coords, x.c.value(), &mut out);
        }
    }
    Ok(TangentVector(out))
}

/// Möbius matrix-vector product `M ⊗_c (x ⊕_c bias)`.
///
/// Returns the origin of the output space when the Euclidean product
/// vanishes.
pub fn mobius_matvec(m: &Array2<f64>, x: &BallPoint, bias: Option<&BallPoint>) -> Result<BallPoint> {
    if m.ncols() != x.dim() {
        return Err(GeometryError::ShapeMismatch {
            cols: m.ncols(),
            dim: x.dim(),
        });
    }
    let shifted;
    let input = match bias {
        Some(b) => {
            shifted = mobius_add(x, b)?;
            &shifted
        }
        None => x,
    };
    let m = m.as_standard_layout();
    let flat = m.as_slice().expect("standard layout");
    let mut mx = vec![0.0; m.nrows()];
    let mut out = vec![0.0; m.nrows()];
    kernels::mobius_matvec(flat, &input.coords, x.c.value(), &mut mx, &mut out);
    project_to_ball(out, x.c)
}

/// The embedding space used by prototypes and classifier heads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Space {
    Poincare(Curvature),
    Euclidean,
}

impl Space {
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Space::Poincare(c) => kernels::dist(x, y, c.value()),
            Space::Euclidean => kernels::euclid_dist(x, y),
        }
    }

    /// Accumulates `scale * ∂d/∂x` and `scale * ∂d/∂y`.
    pub fn distance_grad(&self, x: &[f64], y: &[f64], scale: f64, gx: &mut [f64], gy: &mut [f64]) {
        match self {
            Space::Poincare(c) => kernels::dist_grad(x, y, c.value(), scale, gx, gy),
            Space::Euclidean => kernels::euclid_dist_grad(x, y, scale, gx, gy),
        }
    }

    /// One descent step on a point given its Euclidean gradient.
    ///
    /// In the ball the gradient is rescaled by `1/λ_x^2`, followed along the
    /// exponential map at `x` and clipped to the margin. In Euclidean space
    /// this is a plain gradient step.
    pub fn step(&self, x: &mut [f64], grad: &[f64], lr: f64) {
        match self {
            Space::Poincare(c) => riemannian_step(x, grad, lr, c.value()),
            Space::Euclidean => x.iter_mut().zip(grad).for_each(|(xi, gi)| *xi -= lr * gi),
        }
    }

    pub fn curvature(&self) -> Option<Curvature> {
        match self {
            Space::Poincare(c) => Some(*c),
            Space::Euclidean => None,
        }
    }
}

pub(crate) fn riemannian_step(x: &mut [f64], grad: &[f64], lr: f64, c: f64) {
    let lam = kernels::lambda(x, c);
    let k = -lr / (lam * lam);
    let v: Vec<f64> = grad.iter().map(|g| k * g).collect();
    let mut out = vec![0.0; x.len()];
    kernels::exp_map(&v, x, c, &mut out);
    kernels::project_in_place(&mut out, c);
    x.copy_from_slice(&out);
}
