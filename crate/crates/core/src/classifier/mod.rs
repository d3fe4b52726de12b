//! Prototype-network head: features are mapped into the ball with the
//! origin exponential map, shifted by a Möbius bias, transformed by a Möbius
//! linear layer, and classified by distance to class prototypes.

mod backbone;
mod checkpoint;
mod loss;
mod train;

use ndarray::{Array2, ArrayView1};
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::data::{DataError, FeatureBatch};
use crate::format::FormatError;
use crate::geometry::{grad, kernels, GeometryError, Space};
use crate::hierarchy::TaxonomyError;
use crate::prototypes::{PrototypeError, PrototypeSet};
use crate::rng::{self, Stream};

pub use backbone::TinyBackbone;
pub use checkpoint::{Checkpoint, MAGIC as CHECKPOINT_MAGIC};
pub use loss::{dce_loss, embed, loss_and_grad, predict_proba, predict_topk, total_loss, Gradients, LossParts};
pub use train::{init_model, train, EpochRecord, Hierarchy, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("invalid config `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("head and prototypes live in different spaces")]
    SpaceMismatch,
    #[error("k = {k} is out of range for {classes} classes")]
    TopK { k: usize, classes: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("leaf order digest mismatch: model was trained on a different taxonomy")]
    DigestMismatch,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Prototype(#[from] PrototypeError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

pub type Result<T> = std::result::Result<T, ClassifierError>;

/// Parameters of the embedding head.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicHead {
    /// Linear map, `n_proto x p`.
    pub w: Array2<f64>,
    /// Bias in feature space (dimension `p`), Möbius-added before the map.
    pub bias: Vec<f64>,
    space: Space,
    temperature: f64,
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    f: Vec<f64>,
    e_pre: Vec<f64>,
    e_clip: Option<f64>,
    e: Vec<f64>,
    y_pre: Vec<f64>,
    y_clip: Option<f64>,
    y: Vec<f64>,
    mx: Vec<f64>,
    z_pre: Vec<f64>,
    z_clip: Option<f64>,
    pub(crate) z: Vec<f64>,
}

impl HyperbolicHead {
    pub fn new(w: Array2<f64>, bias: Vec<f64>, space: Space, temperature: f64) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(ClassifierError::InvalidConfig {
                field: "temperature",
                reason: format!("must be positive, got {temperature}"),
            });
        }
        if bias.len() != w.ncols() {
            return Err(ClassifierError::DimensionMismatch {
                what: "bias length",
                expected: w.ncols(),
                found: bias.len(),
            });
        }
        if let Space::Poincare(c) = space {
            crate::geometry::BallPoint::new(bias.clone(), c)?;
        }
        Ok(Self {
            w: w.as_standard_layout().into_owned(),
            bias,
            space,
            temperature,
        })
    }

    /// `W ~ N(0, 1/p)`, zero bias.
    pub fn init(p: usize, n_proto: usize, space: Space, temperature: f64, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, Stream::Head);
        let normal = Normal::new(0.0, (1.0 / p as f64).sqrt()).expect("valid sigma");
        let w = Array2::from_shape_simple_fn((n_proto, p), || normal.sample(&mut rng));
        Self::new(w, vec![0.0; p], space, temperature)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.nrows()
    }

    fn w_slice(&self) -> &[f64] {
        self.w.as_slice().expect("standard layout")
    }

    pub(crate) fn forward(&self, f: &[f64]) -> Trace {
        let p = f.len();
        let n = self.output_dim();
        match self.space {
            Space::Poincare(c) => {
                let c = c.value();
                let mut e_pre = vec![0.0; p];
                kernels::exp0(f, c, &mut e_pre);
                let mut e = e_pre.clone();
                let e_clip = kernels::project_in_place(&mut e, c);
                let mut y_pre = vec![0.0; p];
                kernels::mobius_add(&e, &self.bias, c, &mut y_pre);
                let mut y = y_pre.clone();
                let y_clip = kernels::project_in_place(&mut y, c);
                let mut mx = vec![0.0; n];
                let mut z_pre = vec![0.0; n];
                kernels::mobius_matvec(self.w_slice(), &y, c, &mut mx, &mut z_pre);
                let mut z = z_pre.clone();
                let z_clip = kernels::project_in_place(&mut z, c);
                Trace { f: f.to_vec(), e_pre, e_clip, e, y_pre, y_clip, y, mx, z_pre, z_clip, z }
            }
            Space::Euclidean => {
                let y: Vec<f64> = f.iter().zip(&self.bias).map(|(a, b)| a + b).collect();
                let z: Vec<f64> = self.w.rows().into_iter().map(|r| kernels::dot(r.as_slice().expect("row"), &y)).collect();
                Trace {
                    f: f.to_vec(),
                    e_pre: Vec::new(),
                    e_clip: None,
                    e: Vec::new(),
                    y_pre: Vec::new(),
                    y_clip: None,
                    y,
                    mx: Vec::new(),
                    z_pre: Vec::new(),
                    z_clip: None,
                    z,
                }
            }
        }
    }

    /// Accumulates gradients of `W`, bias and the input feature.
    pub(crate) fn backward(&self, t: &Trace, gz: &[f64], gw: &mut [f64], gb: &mut [f64], gf: &mut [f64]) {
        let p = t.f.len();
        match self.space {
            Space::Poincare(c) => {
                let c = c.value();
                let mut g_zpre = vec![0.0; gz.len()];
                grad::project_vjp(&t.z_pre, t.z_clip, c, gz, &mut g_zpre);
                let mut gy = vec![0.0; p];
                grad::mobius_matvec_vjp(self.w_slice(), &t.y, &t.mx, c, &g_zpre, gw, &mut gy);
                let mut g_ypre = vec![0.0; p];
                grad::project_vjp(&t.y_pre, t.y_clip, c, &gy, &mut g_ypre);
                let mut ge = vec![0.0; p];
                grad::mobius_add_vjp(&t.e, &self.bias, c, &g_ypre, &mut ge, gb);
                let mut g_epre = vec![0.0; p];
                grad::project_vjp(&t.e_pre, t.e_clip, c, &ge, &mut g_epre);
                grad::exp0_vjp(&t.f, c, &g_epre, gf);
            }
            Space::Euclidean => {
                let w = self.w_slice();
                for (r, g) in gz.iter().enumerate() {
                    for j in 0..p {
                        gw[r * p + j] += g * t.y[j];
                        let gyj = g * w[r * p + j];
                        gb[j] += gyj;
                        gf[j] += gyj;
                    }
                }
            }
        }
    }

    pub fn embed_one(&self, f: &[f64]) -> Vec<f64> {
        self.forward(f).z
    }
}

/// Optional backbone, head, and prototypes.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub backbone: Option<TinyBackbone>,
    pub head: HyperbolicHead,
    pub prototypes: PrototypeSet,
}

impl Model {
    pub fn new(backbone: Option<TinyBackbone>, head: HyperbolicHead, prototypes: PrototypeSet) -> Result<Self> {
        if head.space() != prototypes.space() {
            return Err(ClassifierError::SpaceMismatch);
        }
        if head.output_dim() != prototypes.dim() {
            return Err(ClassifierError::DimensionMismatch {
                what: "prototype dimension",
                expected: head.output_dim(),
                found: prototypes.dim(),
            });
        }
        if let Some(bb) = &backbone {
            if bb.output_dim() != head.input_dim() {
                return Err(ClassifierError::DimensionMismatch {
                    what: "backbone output",
                    expected: head.input_dim(),
                    found: bb.output_dim(),
                });
            }
        }
        Ok(Self { backbone, head, prototypes })
    }

    pub fn input_dim(&self) -> usize {
        self.backbone.as_ref().map_or(self.head.input_dim(), TinyBackbone::input_dim)
    }

    pub fn num_classes(&self) -> usize {
        self.prototypes.num_classes()
    }

    fn check_inputs(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(ClassifierError::DimensionMismatch {
                what: "input width",
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        Ok(())
    }

    /// Backbone features `f(x)` (the inputs themselves without a backbone).
    pub fn features(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_inputs(x)?;
        Ok(match &self.backbone {
            None => x.to_owned(),
            Some(bb) => {
                let mut out = Array2::zeros((x.nrows(), bb.output_dim()));
                for (i, row) in x.rows().into_iter().enumerate() {
                    out.row_mut(i).assign(&bb.forward(row).0);
                }
                out
            }
        })
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        predict_proba(&self.head, &self.prototypes, &self.features(x)?)
    }

    pub fn predict_topk(&self, x: &Array2<f64>, k: usize) -> Result<Vec<Vec<usize>>> {
        predict_topk(&self.head, &self.prototypes, &self.features(x)?, k)
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        Ok(self.predict_topk(x, 1)?.into_iter().map(|r| r[0]).collect())
    }

    pub fn dce_loss(&self, batch: &FeatureBatch) -> Result<f64> {
        let feats = FeatureBatch::new(self.features(&batch.x)?, batch.y.clone());
        dce_loss(&self.head, &self.prototypes, &feats)
    }

    pub(crate) fn row_features(&self, x: ArrayView1<f64>) -> (Vec<f64>, Option<ndarray::Array1<f64>>) {
        match &self.backbone {
            None => (x.to_vec(), None),
            Some(bb) => {
                let (f, h) = bb.forward(x);
                (f.to_vec(), Some(h))
            }
        }
    }
}
