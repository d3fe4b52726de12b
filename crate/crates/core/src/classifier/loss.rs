use ndarray::Array2;

use super::{ClassifierError, HyperbolicHead, Model, Result, TinyBackbone};
use crate::data::FeatureBatch;
use crate::hierarchy::ClassDistanceMatrix;
use crate::prototypes::{disto_loss, disto_loss_grad, PrototypeSet};

fn check(head: &HyperbolicHead, p: &PrototypeSet, x: &Array2<f64>) -> Result<()> {
    if head.space() != p.space() {
        return Err(ClassifierError::SpaceMismatch);
    }
    if head.output_dim() != p.dim() {
        return Err(ClassifierError::DimensionMismatch {
            what: "prototype dimension",
            expected: head.output_dim(),
            found: p.dim(),
        });
    }
    if x.ncols() != head.input_dim() {
        return Err(ClassifierError::DimensionMismatch {
            what: "feature width",
            expected: head.input_dim(),
            found: x.ncols(),
        });
    }
    Ok(())
}

fn distances(p: &PrototypeSet, z: &[f64]) -> Vec<f64> {
    let space = p.space();
    (0..p.num_classes()).map(|k| space.distance(z, p.point(k))).collect()
}

/// `log Σ_j exp(-d_j / T)` evaluated around the smallest distance.
fn log_sum_exp_neg(d: &[f64], t: f64) -> f64 {
    let m = d.iter().copied().fold(f64::INFINITY, f64::min);
    -m / t + d.iter().map(|x| ((m - x) / t).exp()).sum::<f64>().ln()
}

/// Embeds each feature row; rows of the result are ball points.
pub fn embed(head: &HyperbolicHead, x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != head.input_dim() {
        return Err(ClassifierError::DimensionMismatch {
            what: "feature width",
            expected: head.input_dim(),
            found: x.ncols(),
        });
    }
    let mut out = Array2::zeros((x.nrows(), head.output_dim()));
    for (i, row) in x.rows().into_iter().enumerate() {
        let z = head.embed_one(&row.to_vec());
        out.row_mut(i).iter_mut().zip(z).for_each(|(o, v)| *o = v);
    }
    Ok(out)
}

/// Softmax over `-d(z_i, a_k) / T`.
pub fn predict_proba(head: &HyperbolicHead, p: &PrototypeSet, x: &Array2<f64>) -> Result<Array2<f64>> {
    check(head, p, x)?;
    let t = head.temperature();
    let k = p.num_classes();
    let mut out = Array2::zeros((x.nrows(), k));
    for (i, row) in x.rows().into_iter().enumerate() {
        let d = distances(p, &head.embed_one(&row.to_vec()));
        let lse = log_sum_exp_neg(&d, t);
        for j in 0..k {
            out[[i, j]] = (-d[j] / t - lse).exp();
        }
    }
    Ok(out)
}

/// Mean distance cross-entropy `d_y / T + log Σ_j exp(-d_j / T)`.
pub fn dce_loss(head: &HyperbolicHead, p: &PrototypeSet, batch: &FeatureBatch) -> Result<f64> {
    check(head, p, &batch.x)?;
    batch.validate(p.num_classes())?;
    let t = head.temperature();
    let mut sum = 0.0;
    for (row, &y) in batch.x.rows().into_iter().zip(&batch.y) {
        let d = distances(p, &head.embed_one(&row.to_vec()));
        sum += d[y] / t + log_sum_exp_neg(&d, t);
    }
    Ok(sum / batch.len().max(1) as f64)
}

/// `dce_loss + weight * disto_loss`.
pub fn total_loss(
    head: &HyperbolicHead,
    p: &PrototypeSet,
    batch: &FeatureBatch,
    d: &ClassDistanceMatrix,
    weight: f64,
) -> Result<f64> {
    let dce = dce_loss(head, p, batch)?;
    if weight == 0.0 {
        return Ok(dce);
    }
    Ok(dce + weight * disto_loss(p, d)?)
}

/// Top-`k` classes per row by ascending distance, ties broken by class index.
pub fn predict_topk(head: &HyperbolicHead, p: &PrototypeSet, x: &Array2<f64>, k: usize) -> Result<Vec<Vec<usize>>> {
    check(head, p, x)?;
    let classes = p.num_classes();
    if k == 0 || k > classes {
        return Err(ClassifierError::TopK { k, classes });
    }
    Ok(x.rows()
        .into_iter()
        .map(|row| {
            let d = distances(p, &head.embed_one(&row.to_vec()));
            let mut idx: Vec<usize> = (0..classes).collect();
            idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
            idx.truncate(k);
            idx
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub dce: f64,
    pub disto: Option<f64>,
    pub total: f64,
}

/// Gradients for every parameter group of a [`Model`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w: Array2<f64>,
    pub bias: Vec<f64>,
    pub prototypes: Array2<f64>,
    pub backbone: Option<TinyBackbone>,
}

/// Total loss on `batch` and its gradient with respect to all parameters.
///
/// The distortion term is added when `d` is given and `weight != 0`; it
/// only reaches the prototypes.
pub fn loss_and_grad(
    model: &Model,
    batch: &FeatureBatch,
    d: Option<&ClassDistanceMatrix>,
    weight: f64,
) -> Result<(LossParts, Gradients)> {
    let head = &model.head;
    let protos = &model.prototypes;
    model.check_inputs(&batch.x)?;
    batch.validate(protos.num_classes())?;
    let k = protos.num_classes();
    let n = protos.dim();
    let p = head.input_dim();
    let t = head.temperature();
    let space = protos.space();
    let m = batch.len().max(1) as f64;

    let mut gw = Array2::<f64>::zeros((head.output_dim(), p));
    let mut gb = vec![0.0; p];
    let mut gp = Array2::<f64>::zeros((k, n));
    let mut gbb = model.backbone.as_ref().map(TinyBackbone::zeros_like);
    let mut dce = 0.0;

    let mut gz = vec![0.0; n];
    let mut ga = vec![0.0; n];
    let mut gf = vec![0.0; p];
    for (row, &y) in batch.x.rows().into_iter().zip(&batch.y) {
        let (f, hidden) = model.row_features(row);
        let trace = head.forward(&f);
        let z = &trace.z;
        let d = distances(protos, z);
        let lse = log_sum_exp_neg(&d, t);
        dce += d[y] / t + lse;

        gz.iter_mut().for_each(|g| *g = 0.0);
        for j in 0..k {
            let prob = (-d[j] / t - lse).exp();
            let dl = ((if j == y { 1.0 } else { 0.0 }) - prob) / (t * m);
            ga.iter_mut().for_each(|g| *g = 0.0);
            space.distance_grad(z, protos.point(j), dl, &mut gz, &mut ga);
            gp.row_mut(j).iter_mut().zip(&ga).for_each(|(a, b)| *a += b);
        }
        gf.iter_mut().for_each(|g| *g = 0.0);
        head.backward(&trace, &gz, gw.as_slice_mut().expect("standard layout"), &mut gb, &mut gf);
        if let (Some(bb), Some(h), Some(g)) = (&model.backbone, &hidden, gbb.as_mut()) {
            bb.backward(row, h, ndarray::ArrayView1::from(&gf[..]), g);
        }
    }
    dce /= m;

    let mut disto = None;
    if let Some(dm) = d {
        if weight != 0.0 {
            let (l, g) = disto_loss_grad(protos, dm)?;
            gp.scaled_add(weight, &g);
            disto = Some(l);
        }
    }
    let total = dce + weight * disto.unwrap_or(0.0);
    if !total.is_finite() {
        return Err(ClassifierError::Numerical(format!("loss is {total}")));
    }
    Ok((
        LossParts { dce, disto, total },
        Gradients {
            w: gw,
            bias: gb,
            prototypes: gp,
            backbone: gbb,
        },
    ))
}
