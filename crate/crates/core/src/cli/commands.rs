use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::error::Ctx;
use super::{
    CliError, EncodeArgs, ErrorKind, EvalArgs, ExportArgs, FeatureFormat, FitArgs, GenerateArgs, Method, SweepArgs,
    TrainArgs,
};
use crate::classifier::{self, Checkpoint, Hierarchy, CHECKPOINT_MAGIC};
use crate::data::{synthetic_benchmark, FeatureBatch, FeatureTable, SyntheticConfig};
use crate::hierarchy::{
    hcd_encode, lcd_encode, leaf_digest, parse_taxonomy_file, ClassDistanceMatrix, Encoding, HcdConfig, Taxonomy, TaxonomyError,
    TaxonomyFormat,
};
use crate::metrics::{group_accuracy, read_groups, EvalReport, Predictions};
use crate::prototypes::{self, fit_prototypes, pairwise_distances, DistortionReport, FitConfig, PrototypeSet};

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable");
    out.push(b'\n');
    out
}

/// Hashes the command name and its flags (`--out` is skipped by serde).
fn context<T: Serialize>(command: &'static str, args: &T) -> (Ctx, serde_json::Value) {
    let config = json!({ "command": command, "config": args });
    let hash = sha256_hex(&serde_json::to_vec(&config).expect("serializable"));
    (Ctx { hash }, config)
}

/// `dir/stem.suffix` for a file output `dir/stem.ext`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.{suffix}"))
}

/// Files produced by one command, written together with a manifest.
struct Artifacts<'a> {
    ctx: &'a Ctx,
    config: serde_json::Value,
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl<'a> Artifacts<'a> {
    fn new(ctx: &'a Ctx, config: serde_json::Value) -> Self {
        Self {
            ctx,
            config,
            files: Vec::new(),
        }
    }

    fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    fn write(self, manifest: PathBuf) -> Result<(), CliError> {
        let mut digests = BTreeMap::new();
        for (path, bytes) in &self.files {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(self.ctx.err("write"))?;
            }
            fs::write(path, bytes)
                .map_err(|e| self.ctx.fail("write", ErrorKind::Data, format!("{}: {e}", path.display())))?;
            let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            digests.insert(name, sha256_hex(bytes));
        }
        let body = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.config["command"],
            "config": self.config["config"],
            "config_hash": self.ctx.hash,
            "files": digests,
        });
        fs::write(&manifest, to_json(&body))
            .map_err(|e| self.ctx.fail("write", ErrorKind::Data, format!("{}: {e}", manifest.display())))
    }
}

fn read_bytes(ctx: &Ctx, stage: &'static str, path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| ctx.fail(stage, ErrorKind::Data, format!("{}: {e}", path.display())))
}

fn read_taxonomy(ctx: &Ctx, path: &Path) -> Result<Taxonomy, CliError> {
    parse_taxonomy_file(path, TaxonomyFormat::Auto).map_err(|e| match e {
        TaxonomyError::Io(_) => ctx.err("read-taxonomy")(e),
        e => ctx.fail("read-taxonomy", ErrorKind::Data, format!("{}: {e}", path.display())),
    })
}

fn read_features(ctx: &Ctx, path: &Path, classes: &[String]) -> Result<FeatureBatch, CliError> {
    let bytes = read_bytes(ctx, "read-features", path)?;
    let table = FeatureTable::read_any(&bytes)
        .map_err(|e| ctx.fail("read-features", ErrorKind::Data, format!("{}: {e}", path.display())))?;
    table.to_batch(classes).map_err(ctx.err("read-features"))
}

fn read_matrix(ctx: &Ctx, path: &Path, encoding: Encoding) -> Result<ClassDistanceMatrix, CliError> {
    let bytes = read_bytes(ctx, "read-matrix", path)?;
    ClassDistanceMatrix::read_csv(&bytes[..], encoding)
        .map_err(|e| ctx.fail("read-matrix", ErrorKind::Data, format!("{}: {e}", path.display())))
}

fn matrix_csv(d: &ClassDistanceMatrix) -> Vec<u8> {
    let mut out = Vec::new();
    d.write_csv(&mut out).expect("in-memory write");
    out
}

fn encoding(m: Method) -> Encoding {
    match m {
        Method::Lcd => Encoding::Lcd,
        Method::Hcd => Encoding::Hcd,
    }
}

fn ensure_dir(ctx: &Ctx, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| ctx.fail("write", ErrorKind::Data, format!("{}: {e}", dir.display())))
}

pub fn generate(a: &GenerateArgs) -> Result<(), CliError> {
    let (ctx, config) = context("generate", a);
    let cfg = SyntheticConfig {
        branching: a.branching.clone(),
        dim: a.feature_dim,
        level_scales: a.level_scales.clone(),
        noise: a.noise,
        train_per_class: a.train_per_class,
        test_per_class: a.test_per_class,
        seed: a.seed,
    };
    let bench = synthetic_benchmark(&cfg).map_err(ctx.err("generate"))?;
    ensure_dir(&ctx, &a.out)?;
    let mut arts = Artifacts::new(&ctx, config);
    arts.add(a.out.join("taxonomy.txt"), bench.taxonomy.to_indented().into_bytes());
    for (name, table) in [("train", &bench.train), ("test", &bench.test)] {
        let mut bytes = Vec::new();
        match a.format {
            FeatureFormat::Csv => {
                table.write_csv(&mut bytes).expect("in-memory write");
                arts.add(a.out.join(format!("{name}.csv")), bytes);
            }
            FeatureFormat::Binary => {
                table.write_binary(&mut bytes).expect("in-memory write");
                arts.add(a.out.join(format!("{name}.bin")), bytes);
            }
        }
    }
    arts.write(a.out.join("manifest.json"))
}

#[derive(Serialize)]
struct HcdSummary<'a> {
    config_hash: &'a str,
    epochs: usize,
    final_objective: f64,
    converged: bool,
    /// Fit of the leaf embedding to the LCD matrix; absent below two classes.
    distortion_vs_lcd: Option<DistortionReport>,
}

pub fn encode_hierarchy(a: &EncodeArgs) -> Result<(), CliError> {
    let (ctx, config) = context("encode-hierarchy", a);
    let t = read_taxonomy(&ctx, &a.taxonomy)?;
    let mut arts = Artifacts::new(&ctx, config);
    match a.method {
        Method::Lcd => arts.add(a.out.clone(), matrix_csv(&lcd_encode(&t))),
        Method::Hcd => {
            let cfg = HcdConfig {
                n_embed: a.hcd_dim,
                curvature: a.hcd_curvature,
                epochs: a.hcd_epochs,
                seed: a.seed,
                ..HcdConfig::default()
            };
            let out = hcd_encode(&t, &cfg).map_err(ctx.err("encode"))?;
            arts.add(a.out.clone(), matrix_csv(&out.matrix));
            let mut nodes = Vec::new();
            out.embedding.write_csv(&mut nodes).expect("in-memory write");
            arts.add(sibling(&a.out, "nodes.csv"), nodes);

            let distortion = if t.num_classes() >= 2 {
                let space = crate::geometry::Space::Poincare(
                    crate::geometry::Curvature::new(a.hcd_curvature).map_err(ctx.err("encode"))?,
                );
                let mut pts = ndarray::Array2::zeros((t.num_classes(), a.hcd_dim));
                for (k, leaf) in t.leaves().enumerate() {
                    pts.row_mut(k).assign(&ndarray::ArrayView1::from(out.embedding.points[leaf.0].coords()));
                }
                let leaves = PrototypeSet::new(pts, t.leaf_labels(), space).map_err(ctx.err("encode"))?;
                Some(DistortionReport::compute(&leaves, &lcd_encode(&t)).map_err(ctx.err("encode"))?)
            } else {
                None
            };
            let summary = HcdSummary {
                config_hash: &ctx.hash,
                epochs: a.hcd_epochs,
                final_objective: out.final_objective,
                converged: out.converged,
                distortion_vs_lcd: distortion,
            };
            arts.add(sibling(&a.out, "summary.json"), to_json(&summary));
            if !out.converged {
                eprintln!("warning: hcd objective was still decreasing at the last epoch");
            }
        }
    }
    arts.write(sibling(&a.out, "manifest.json"))
}

#[derive(Serialize)]
struct FitReport<'a> {
    config_hash: &'a str,
    steps: usize,
    #[serde(flatten)]
    report: DistortionReport,
    final_loss: Option<f64>,
}

pub fn fit(a: &FitArgs) -> Result<(), CliError> {
    let (ctx, config) = context("fit-prototypes", a);
    let d = match (&a.matrix, &a.taxonomy) {
        (Some(m), _) => read_matrix(&ctx, m, encoding(a.hierarchy))?,
        (None, Some(tp)) => {
            let t = read_taxonomy(&ctx, tp)?;
            match a.hierarchy {
                Method::Lcd => lcd_encode(&t),
                Method::Hcd => {
                    let cfg = HcdConfig {
                        seed: a.seed,
                        ..HcdConfig::default()
                    };
                    hcd_encode(&t, &cfg).map_err(ctx.err("encode"))?.matrix
                }
            }
        }
        (None, None) => return Err(ctx.fail("config", ErrorKind::Config, "need --taxonomy or --matrix")),
    };
    let cfg = FitConfig {
        mode: a.mode,
        dim: a.dim,
        curvature: a.curvature,
        steps: a.steps,
        learning_rate: a.learning_rate,
        seed: a.seed,
    };
    let (p, report, history) = fit_prototypes(&d, &cfg).map_err(ctx.err("fit"))?;
    ensure_dir(&ctx, &a.out)?;
    let mut arts = Artifacts::new(&ctx, config);
    let mut bin = Vec::new();
    p.write_binary(&mut bin).map_err(ctx.err("write"))?;
    arts.add(a.out.join("prototypes.bin"), bin);
    let mut csv = Vec::new();
    p.write_csv(&mut csv).expect("in-memory write");
    arts.add(a.out.join("prototypes.csv"), csv);
    arts.add(a.out.join("matrix.csv"), matrix_csv(&d));
    let summary = FitReport {
        config_hash: &ctx.hash,
        steps: a.steps,
        report,
        final_loss: history.last().copied(),
    };
    arts.add(a.out.join("report.json"), to_json(&summary));
    arts.write(a.out.join("manifest.json"))
}

fn given_matrix(ctx: &Ctx, m: &super::ModelArgs) -> Result<Option<ClassDistanceMatrix>, CliError> {
    let Some(path) = &m.matrix else { return Ok(None) };
    let enc = match m.hierarchy {
        Hierarchy::Lcd => Encoding::Lcd,
        Hierarchy::Hcd => Encoding::Hcd,
        Hierarchy::None => {
            return Err(ctx.fail("config", ErrorKind::Config, "--matrix needs --hierarchy lcd or hcd"));
        }
    };
    read_matrix(ctx, path, enc).map(Some)
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let (ctx, config) = context("train", a);
    let t = read_taxonomy(&ctx, &a.taxonomy)?;
    let classes = t.leaf_labels();
    let batch = read_features(&ctx, &a.features, &classes)?;
    let given = given_matrix(&ctx, &a.model)?;
    let cfg = a.model.to_config(a.curvature, a.dim, a.seed);
    let out = classifier::train(&cfg, &batch, &classes, Some(&t), given.as_ref()).map_err(ctx.err("train"))?;

    ensure_dir(&ctx, &a.out)?;
    let mut arts = Artifacts::new(&ctx, config);
    let mut history = Vec::new();
    for rec in &out.history {
        serde_json::to_writer(&mut history, rec).expect("serializable");
        history.push(b'\n');
    }
    let ckpt = Checkpoint::new(out.model, ctx.hash.clone(), out.distance_matrix);
    let mut bin = Vec::new();
    ckpt.write(&mut bin).map_err(ctx.err("write"))?;
    arts.add(a.out.join("model.bin"), bin);
    arts.add(a.out.join("history.jsonl"), history);
    arts.write(a.out.join("manifest.json"))
}

pub fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let (ctx, config) = context("eval", a);
    let t = read_taxonomy(&ctx, &a.taxonomy)?;
    let classes = t.leaf_labels();
    let (topk, y, predictions) = match (&a.model, &a.predictions) {
        (Some(model), _) => {
            let bytes = read_bytes(&ctx, "read-model", model)?;
            let ckpt = Checkpoint::read(&bytes[..]).map_err(ctx.err("read-model"))?;
            ckpt.check_classes(&classes).map_err(ctx.err("read-model"))?;
            let features = a
                .features
                .as_ref()
                .ok_or_else(|| ctx.fail("config", ErrorKind::Config, "--model needs --features"))?;
            let batch = read_features(&ctx, features, &classes)?;
            let topk = ckpt.model.predict_topk(&batch.x, a.k).map_err(ctx.err("predict"))?;
            let preds = Predictions::from_indices(&topk, &batch.y, &classes);
            (topk, batch.y, Some(preds))
        }
        (None, Some(path)) => {
            let bytes = read_bytes(&ctx, "read-predictions", path)?;
            let preds = Predictions::read_csv(&bytes[..]).map_err(ctx.err("read-predictions"))?;
            let (topk, y) = preds.to_indices(&t).map_err(ctx.err("read-predictions"))?;
            (topk, y, None)
        }
        (None, None) => return Err(ctx.fail("config", ErrorKind::Config, "need --model or --predictions")),
    };
    let mut report = EvalReport::compute(&topk, &y, &t, a.k).map_err(ctx.err("evaluate"))?;
    if let Some(gpath) = &a.groups {
        let bytes = read_bytes(&ctx, "read-groups", gpath)?;
        let groups = read_groups(&bytes[..], &t).map_err(ctx.err("read-groups"))?;
        let top1: Vec<usize> = topk.iter().map(|r| r[0]).collect();
        report.group_accuracy = Some(group_accuracy(&top1, &y, &groups).map_err(ctx.err("evaluate"))?);
    }
    report.config_hash = Some(ctx.hash.clone());

    ensure_dir(&ctx, &a.out)?;
    let mut arts = Artifacts::new(&ctx, config);
    arts.add(a.out.join("report.json"), to_json(&report));
    if let Some(p) = predictions {
        let mut csv = Vec::new();
        p.write_csv(&mut csv).expect("in-memory write");
        arts.add(a.out.join("predictions.csv"), csv);
    }
    arts.write(a.out.join("manifest.json"))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    let (ctx, config) = context("sweep", a);
    if a.curvatures.is_empty() || a.dims.is_empty() || a.seeds.is_empty() {
        return Err(ctx.fail("config", ErrorKind::Config, "sweep grid is empty"));
    }
    let t = read_taxonomy(&ctx, &a.taxonomy)?;
    let classes = t.leaf_labels();
    let train = read_features(&ctx, &a.features, &classes)?;
    let test = match &a.test_features {
        Some(p) => read_features(&ctx, p, &classes)?,
        None => train.clone(),
    };
    let given = given_matrix(&ctx, &a.model)?;
    let lcd = (classes.len() >= 2).then(|| lcd_encode(&t));

    let mut cells = Vec::new();
    for &c in &a.curvatures {
        for &dim in &a.dims {
            for &seed in &a.seeds {
                cells.push((c, dim, seed));
            }
        }
    }
    let rows = cells
        .par_iter()
        .map(|&(c, dim, seed)| -> Result<Vec<String>, CliError> {
            let cfg = a.model.to_config(c, dim, seed);
            let out =
                classifier::train(&cfg, &train, &classes, Some(&t), given.as_ref()).map_err(ctx.err("train"))?;
            let topk = out.model.predict_topk(&test.x, a.k).map_err(ctx.err("predict"))?;
            let report = EvalReport::compute(&topk, &test.y, &t, a.k).map_err(ctx.err("evaluate"))?;
            let disto = match &lcd {
                Some(d) => Some(prototypes::distortion(&out.model.prototypes, d).map_err(ctx.err("evaluate"))?),
                None => None,
            };
            Ok(vec![
                c.to_string(),
                dim.to_string(),
                seed.to_string(),
                report.accuracy.to_string(),
                opt(report.mistake_severity),
                report.hd_at_k.to_string(),
                opt(disto),
            ])
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let hd = format!("hd_at_{}", a.k);
    w.write_record(["c", "dim", "seed", "accuracy", "mistake_severity", hd.as_str(), "disto"])
        .expect("in-memory write");
    for r in &rows {
        w.write_record(r).expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory write");
    let mut arts = Artifacts::new(&ctx, config);
    arts.add(a.out.clone(), bytes);
    arts.write(sibling(&a.out, "manifest.json"))
}

pub fn export_matrix(a: &ExportArgs) -> Result<(), CliError> {
    let (ctx, config) = context("export-matrix", a);
    let bytes = read_bytes(&ctx, "read-model", &a.model)?;
    let (protos, stored) = if bytes.starts_with(CHECKPOINT_MAGIC) {
        let ckpt = Checkpoint::read(&bytes[..]).map_err(ctx.err("read-model"))?;
        (ckpt.model.prototypes, ckpt.distance_matrix)
    } else if bytes.starts_with(prototypes::io::MAGIC) {
        (PrototypeSet::read_binary(&bytes[..]).map_err(ctx.err("read-model"))?, None)
    } else {
        return Err(ctx.fail(
            "read-model",
            ErrorKind::Data,
            format!("{}: not a model checkpoint or prototype file", a.model.display()),
        ));
    };
    let labels = protos.labels().to_vec();
    let taxonomy = match &a.taxonomy {
        Some(p) => {
            let t = read_taxonomy(&ctx, p)?;
            if leaf_digest(&t.leaf_labels()) != leaf_digest(&labels) {
                return Err(ctx.err("read-model")(classifier::ClassifierError::DigestMismatch));
            }
            Some(t)
        }
        None => None,
    };
    let gt = match (stored, &a.matrix, &taxonomy) {
        (Some(d), _, _) => Some(d),
        (None, Some(m), _) => Some(read_matrix(&ctx, m, Encoding::Lcd)?),
        (None, None, Some(t)) => Some(lcd_encode(t)),
        _ => None,
    };
    if let Some(d) = &gt {
        if d.labels() != labels.as_slice() {
            return Err(ctx.fail("read-matrix", ErrorKind::Data, "ground-truth classes differ from the model's"));
        }
    }

    let pd = pairwise_distances(&protos);
    let k = labels.len();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label".to_string()];
    header.extend(labels.iter().map(|l| format!("pd:{l}")));
    header.extend(labels.iter().map(|l| format!("gt:{l}")));
    w.write_record(&header).expect("in-memory write");
    for i in 0..k {
        let mut row = vec![labels[i].clone()];
        row.extend((0..k).map(|j| pd[[i, j]].to_string()));
        row.extend((0..k).map(|j| gt.as_ref().map_or_else(String::new, |d| d.get(i, j).to_string())));
        w.write_record(&row).expect("in-memory write");
    }
    let mut arts = Artifacts::new(&ctx, config);
    arts.add(a.out.clone(), w.into_inner().expect("in-memory write"));
    arts.write(sibling(&a.out, "manifest.json"))
}
