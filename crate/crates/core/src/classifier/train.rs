use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{loss_and_grad, ClassifierError, HyperbolicHead, Model, Result, TinyBackbone};
use crate::data::FeatureBatch;
use crate::geometry::{Curvature, Space};
use crate::hierarchy::{hcd_encode, lcd_encode, ClassDistanceMatrix, Encoding, HcdConfig, HcdOutcome, Taxonomy};
use crate::prototypes::{init_prototypes, Mode};
use crate::rng::{self, Stream};

/// Which class-distance matrix regularizes the prototypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hierarchy {
    #[default]
    None,
    Lcd,
    Hcd,
}

impl std::str::FromStr for Hierarchy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Hierarchy::None),
            "lcd" => Ok(Hierarchy::Lcd),
            "hcd" => Ok(Hierarchy::Hcd),
            other => Err(format!("unknown hierarchy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub mode: Mode,
    pub hierarchy: Hierarchy,
    pub curvature: f64,
    /// Prototype / embedding dimension.
    pub dim: usize,
    pub temperature: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Step size for `W` and the backbone.
    pub learning_rate: f64,
    /// Step size for the bias and the prototypes.
    pub ball_learning_rate: f64,
    pub disto_weight: f64,
    /// Hidden width of the tiny backbone; 0 feeds inputs to the head as-is.
    pub backbone_hidden: usize,
    /// Backbone output width (ignored without a backbone).
    pub feature_dim: usize,
    pub seed: u64,
    pub hcd: HcdConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Hyperbolic,
            hierarchy: Hierarchy::None,
            curvature: 0.01,
            dim: 16,
            temperature: 0.1,
            epochs: 30,
            batch_size: 64,
            learning_rate: 0.05,
            ball_learning_rate: 0.05,
            disto_weight: 1.0,
            backbone_hidden: 0,
            feature_dim: 16,
            seed: 0,
            hcd: HcdConfig::default(),
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ClassifierError {
    ClassifierError::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<Space> {
        let c = Curvature::new(self.curvature).map_err(|e| invalid("curvature", e.to_string()))?;
        if self.dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(invalid("temperature", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(invalid("learning_rate", "must be positive"));
        }
        if !(self.ball_learning_rate.is_finite() && self.ball_learning_rate > 0.0) {
            return Err(invalid("ball_learning_rate", "must be positive"));
        }
        if !(self.disto_weight.is_finite() && self.disto_weight >= 0.0) {
            return Err(invalid("disto_weight", "must be non-negative"));
        }
        if self.backbone_hidden > 0 && self.feature_dim == 0 {
            return Err(invalid("feature_dim", "must be positive with a backbone"));
        }
        Ok(self.mode.space(c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub dce_loss: f64,
    pub disto_loss: Option<f64>,
    pub total_loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    /// The matrix the prototypes were regularized with, if any.
    pub distance_matrix: Option<ClassDistanceMatrix>,
    pub hcd: Option<HcdOutcome>,
    pub history: Vec<EpochRecord>,
}

fn resolve_matrix(
    cfg: &TrainConfig,
    classes: &[String],
    taxonomy: Option<&Taxonomy>,
    given: Option<&ClassDistanceMatrix>,
) -> Result<(Option<ClassDistanceMatrix>, Option<HcdOutcome>)> {
    let want = match cfg.hierarchy {
        Hierarchy::None => return Ok((None, None)),
        Hierarchy::Lcd => Encoding::Lcd,
        Hierarchy::Hcd => Encoding::Hcd,
    };
    let (d, hcd) = match (given, taxonomy) {
        (Some(d), _) if d.encoding() == want => (d.clone(), None),
        (_, Some(t)) => match want {
            Encoding::Lcd => (lcd_encode(t), None),
            Encoding::Hcd => {
                let hc = HcdConfig {
                    seed: cfg.seed,
                    ..cfg.hcd.clone()
                };
                let out = hcd_encode(t, &hc)?;
                (out.matrix.clone(), Some(out))
            }
        },
        _ => {
            return Err(invalid(
                "hierarchy",
                format!("{want:?} regularization needs a taxonomy or a matching distance matrix"),
            ))
        }
    };
    if d.labels() != classes {
        return Err(invalid("hierarchy", "distance matrix classes differ from the training classes"));
    }
    if classes.len() < 2 {
        return Err(invalid("hierarchy", "distortion needs at least two classes"));
    }
    Ok((Some(d), hcd))
}

/// Full-data loss and accuracy without gradients.
fn evaluate(model: &Model, data: &FeatureBatch, d: Option<&ClassDistanceMatrix>, weight: f64) -> Result<EpochRecord> {
    let feats = model.features(&data.x)?;
    let protos = &model.prototypes;
    let t = model.head.temperature();
    let space = protos.space();
    let (mut dce, mut correct) = (0.0, 0usize);
    for (row, &y) in feats.rows().into_iter().zip(&data.y) {
        let z = model.head.embed_one(row.as_slice().expect("standard layout"));
        let dist: Vec<f64> = (0..protos.num_classes()).map(|k| space.distance(&z, protos.point(k))).collect();
        let min = dist.iter().copied().fold(f64::INFINITY, f64::min);
        let lse = -min / t + dist.iter().map(|x| ((min - x) / t).exp()).sum::<f64>().ln();
        dce += dist[y] / t + lse;
        let best = (0..dist.len())
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)))
            .expect("at least one class");
        correct += usize::from(best == y);
    }
    let m = data.len().max(1) as f64;
    dce /= m;
    let disto = match d {
        Some(dm) if weight != 0.0 => Some(crate::prototypes::disto_loss(protos, dm)?),
        _ => None,
    };
    Ok(EpochRecord {
        epoch: 0,
        dce_loss: dce,
        disto_loss: disto,
        total_loss: dce + weight * disto.unwrap_or(0.0),
        accuracy: correct as f64 / m,
    })
}

/// Builds the initial model for `cfg` and input width `input_dim`.
pub fn init_model(cfg: &TrainConfig, classes: &[String], input_dim: usize) -> Result<Model> {
    let space = cfg.validate()?;
    let (backbone, p) = if cfg.backbone_hidden > 0 {
        (
            Some(TinyBackbone::new(input_dim, cfg.backbone_hidden, cfg.feature_dim, cfg.seed)),
            cfg.feature_dim,
        )
    } else {
        (None, input_dim)
    };
    let head = HyperbolicHead::init(p, cfg.dim, space, cfg.temperature, cfg.seed)?;
    let prototypes = init_prototypes(classes.to_vec(), cfg.dim, space, cfg.seed);
    Model::new(backbone, head, prototypes)
}

/// Mini-batch training of the backbone, head and prototypes.
///
/// `classes` fixes the class order. With `hierarchy = lcd|hcd`, the distance
/// matrix comes from `given` when its encoding matches, otherwise it is
/// computed from `taxonomy`.
pub fn train(
    cfg: &TrainConfig,
    data: &FeatureBatch,
    classes: &[String],
    taxonomy: Option<&Taxonomy>,
    given: Option<&ClassDistanceMatrix>,
) -> Result<TrainOutcome> {
    let space = cfg.validate()?;
    if data.is_empty() {
        return Err(invalid("features", "training set is empty"));
    }
    if classes.is_empty() {
        return Err(invalid("classes", "no classes"));
    }
    data.validate(classes.len())?;
    let (d, hcd) = resolve_matrix(cfg, classes, taxonomy, given)?;
    let mut model = init_model(cfg, classes, data.x.ncols())?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffler = rng::stream(cfg.seed, Stream::Batches);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffler);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.select(chunk);
            let (_, g) = loss_and_grad(&model, &batch, d.as_ref(), cfg.disto_weight)?;
            apply(&mut model, &g, cfg, space);
        }
        let mut rec = evaluate(&model, data, d.as_ref(), cfg.disto_weight)?;
        if !rec.total_loss.is_finite() {
            return Err(ClassifierError::Numerical(format!("epoch {epoch}: loss is {}", rec.total_loss)));
        }
        rec.epoch = epoch;
        history.push(rec);
    }
    Ok(TrainOutcome {
        model,
        distance_matrix: d,
        hcd,
        history,
    })
}

fn apply(model: &mut Model, g: &super::Gradients, cfg: &TrainConfig, space: Space) {
    model.head.w.scaled_add(-cfg.learning_rate, &g.w);
    if let (Some(bb), Some(gb)) = (model.backbone.as_mut(), g.backbone.as_ref()) {
        bb.descend(gb, cfg.learning_rate);
    }
    space.step(&mut model.head.bias, &g.bias, cfg.ball_learning_rate);
    let grad: &Array2<f64> = &g.prototypes;
    for k in 0..model.prototypes.num_classes() {
        let row = grad.row(k);
        space.step(
            model.prototypes.point_mut(k),
            row.as_slice().expect("standard layout"),
            cfg.ball_learning_rate,
        );
    }
}
