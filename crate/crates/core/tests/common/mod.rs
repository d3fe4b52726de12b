//! Independent reference implementations shared by the integration and
//! acceptance tests. Nothing here calls into the library's numeric code.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hyperproto::classifier::{HyperbolicHead, Model};
use hyperproto::geometry::{Curvature, Space};
use hyperproto::hierarchy::Taxonomy;
use hyperproto::prototypes::PrototypeSet;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Uniform direction, scaled norm `sqrt(c)|x|` drawn from `[0, max_scaled)`.
pub fn ball_point<R: Rng>(r: &mut R, dim: usize, c: f64, max_scaled: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
    let n = norm(&v).max(1e-12);
    let target = r.random_range(0.0..max_scaled) / c.sqrt();
    v.iter().map(|x| x * target / n).collect()
}

pub fn mobius_add(x: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let xy = dot(x, y);
    let x2 = dot(x, x);
    let y2 = dot(y, y);
    let a = 1.0 + 2.0 * c * xy + c * y2;
    let b = 1.0 - c * x2;
    let den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
    x.iter().zip(y).map(|(xi, yi)| (a * xi + b * yi) / den).collect()
}

/// Geodesic distance in the arcosh form.
pub fn dist(x: &[f64], y: &[f64], c: f64) -> f64 {
    let d2: f64 = sub(x, y).iter().map(|v| v * v).sum();
    let arg = 1.0 + 2.0 * c * d2 / ((1.0 - c * dot(x, x)) * (1.0 - c * dot(y, y)));
    arg.acosh() / c.sqrt()
}

pub fn lambda(x: &[f64], c: f64) -> f64 {
    2.0 / (1.0 - c * dot(x, x))
}

pub fn exp_map(v: &[f64], x: &[f64], c: f64) -> Vec<f64> {
    let n = norm(v);
    if n == 0.0 {
        return x.to_vec();
    }
    let sc = c.sqrt();
    let k = (sc * lambda(x, c) * n / 2.0).tanh() / (sc * n);
    let step: Vec<f64> = v.iter().map(|vi| k * vi).collect();
    mobius_add(x, &step, c)
}

pub fn exp0(v: &[f64], c: f64) -> Vec<f64> {
    exp_map(v, &vec![0.0; v.len()], c)
}

/// `tanh(|Mx|/|x| artanh(sqrt(c)|x|)) Mx / (sqrt(c)|Mx|)`.
pub fn mobius_matvec(m: &Array2<f64>, x: &[f64], c: f64) -> Vec<f64> {
    let mx: Vec<f64> = m.rows().into_iter().map(|r| dot(r.as_slice().unwrap(), x)).collect();
    let nx = norm(x);
    let nmx = norm(&mx);
    if nmx == 0.0 || nx == 0.0 {
        return vec![0.0; mx.len()];
    }
    let sc = c.sqrt();
    let k = ((nmx / nx) * (sc * nx).atanh()).tanh() / (sc * nmx);
    mx.iter().map(|v| k * v).collect()
}

/// Head forward pass composed from the reference operations above.
pub fn embed(head: &HyperbolicHead, f: &[f64]) -> Vec<f64> {
    match head.space() {
        Space::Poincare(c) => {
            let c = c.value();
            let e = exp0(f, c);
            let y = mobius_add(&e, &head.bias, c);
            mobius_matvec(&head.w, &y, c)
        }
        Space::Euclidean => {
            let y: Vec<f64> = f.iter().zip(&head.bias).map(|(a, b)| a + b).collect();
            head.w.rows().into_iter().map(|r| dot(r.as_slice().unwrap(), &y)).collect()
        }
    }
}

pub fn space_dist(space: Space, x: &[f64], y: &[f64]) -> f64 {
    match space {
        Space::Poincare(c) => dist(x, y, c.value()),
        Space::Euclidean => norm(&sub(x, y)),
    }
}

/// Reference softmax over `-d/T`, computed in the plain (unshifted) form.
pub fn proba_row(model: &Model, x: &[f64]) -> Vec<f64> {
    let z = embed(&model.head, x);
    let p = &model.prototypes;
    let t = model.head.temperature();
    let logits: Vec<f64> = (0..p.num_classes()).map(|k| -space_dist(p.space(), &z, p.point(k)) / t).collect();
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn curvature(c: f64) -> Curvature {
    Curvature::new(c).unwrap()
}

pub fn labels(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("k{i}")).collect()
}

/// Random prototypes well inside the ball (or a unit cube when Euclidean).
pub fn random_prototypes<R: Rng>(r: &mut R, k: usize, dim: usize, space: Space) -> PrototypeSet {
    let mut pts = Array2::zeros((k, dim));
    for i in 0..k {
        let p = match space {
            Space::Poincare(c) => ball_point(r, dim, c.value(), 0.8),
            Space::Euclidean => (0..dim).map(|_| r.random_range(-1.0..1.0)).collect(),
        };
        pts.row_mut(i).iter_mut().zip(p).for_each(|(a, b)| *a = b);
    }
    PrototypeSet::new(pts, labels(k), space).unwrap()
}

/// Random rooted tree: node `i > 0` hangs below a uniformly chosen earlier
/// node. Returns the parent table; node 0 is the root.
pub fn random_parents<R: Rng>(r: &mut R, nodes: usize) -> Vec<Option<usize>> {
    let mut parent = vec![None];
    for i in 1..nodes {
        parent.push(Some(r.random_range(0..i)));
    }
    parent
}

/// Random tree with at most `max_leaves` leaves and at least two.
pub fn random_tree<R: Rng>(r: &mut R, max_leaves: usize) -> (Taxonomy, Vec<Option<usize>>) {
    loop {
        let n = r.random_range(3..=max_leaves + max_leaves / 2 + 2);
        let parent = random_parents(r, n);
        let labels: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
        let t = Taxonomy::from_parents(labels, parent.clone()).unwrap();
        if (2..=max_leaves).contains(&t.num_classes()) {
            return (t, parent);
        }
    }
}

/// Brute-force tree queries on a parent table.
pub struct TreeOracle {
    parent: Vec<Option<usize>>,
    pub leaves: Vec<usize>,
}

impl TreeOracle {
    pub fn new(parent: &[Option<usize>]) -> Self {
        let n = parent.len();
        let leaves = (0..n).filter(|&v| !parent.contains(&Some(v))).collect();
        Self {
            parent: parent.to_vec(),
            leaves,
        }
    }

    /// `v` and its ancestors, nearest first.
    pub fn ancestors(&self, mut v: usize) -> Vec<usize> {
        let mut out = vec![v];
        while let Some(p) = self.parent[v] {
            out.push(p);
            v = p;
        }
        out
    }

    pub fn depth(&self, v: usize) -> usize {
        self.ancestors(v).len() - 1
    }

    pub fn lca(&self, a: usize, b: usize) -> usize {
        let bs = self.ancestors(b);
        *self.ancestors(a).iter().find(|x| bs.contains(x)).unwrap()
    }

    /// Longest downward path to a leaf.
    pub fn height(&self, v: usize) -> usize {
        self.leaves
            .iter()
            .filter(|&&l| self.ancestors(l).contains(&v))
            .map(|&l| self.depth(l) - self.depth(v))
            .max()
            .unwrap()
    }

    pub fn class_distance(&self, i: usize, j: usize) -> usize {
        self.height(self.lca(self.leaves[i], self.leaves[j]))
    }
}

/// Metrics recomputed from the text of a predictions CSV.
pub fn brute_metrics(csv_text: &str, oracle: &TreeOracle, names: &[String], k: usize) -> (f64, Option<f64>, f64) {
    let class = |s: &str| names.iter().position(|n| n == s).unwrap();
    let (mut hits, mut rows, mut ms_sum, mut mistakes, mut hd) = (0usize, 0usize, 0usize, 0usize, 0.0);
    for line in csv_text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let truth = class(f[1]);
        let preds: Vec<usize> = f[2..2 + k].iter().map(|s| class(s)).collect();
        rows += 1;
        if preds[0] == truth {
            hits += 1;
        } else {
            mistakes += 1;
            ms_sum += oracle.class_distance(preds[0], truth);
        }
        hd += preds.iter().map(|&p| oracle.class_distance(p, truth) as f64).sum::<f64>() / k as f64;
    }
    (
        hits as f64 / rows as f64,
        (mistakes > 0).then(|| ms_sum as f64 / mistakes as f64),
        hd / rows as f64,
    )
}

/// Relative error of two gradient vectors, `|a - b| / max(|a|, |b|)`;
/// zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        return 0.0;
    }
    norm(&sub(a, b)) / scale
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Worst relative gradient error per parameter group for one random case.
#[derive(Debug, Clone, Copy)]
pub struct GradErrors {
    pub w: f64,
    pub bias: f64,
    pub prototypes: f64,
    pub backbone: f64,
}

impl GradErrors {
    pub fn max(&self) -> f64 {
        self.w.max(self.bias).max(self.prototypes).max(self.backbone)
    }
}

pub const FD_STEP: f64 = 1e-6;

/// A random small model and batch: m <= 8, K <= 4, all dims <= 6.
pub fn random_model_case(seed: u64, hyperbolic: bool, with_backbone: bool) -> (Model, hyperproto::data::FeatureBatch) {
    use hyperproto::classifier::TinyBackbone;
    let mut r = rng(seed);
    let c = r.random_range(0.1..1.0);
    let space = if hyperbolic { Space::Poincare(curvature(c)) } else { Space::Euclidean };
    let m = r.random_range(1..=8);
    let k = r.random_range(2..=4);
    let p = r.random_range(2..=6);
    let n = r.random_range(2..=6);
    let input = r.random_range(2..=6);
    let t = r.random_range(0.1..1.0);
    let w = Array2::from_shape_fn((n, p), |_| r.random_range(-0.5..0.5));
    let bias = match space {
        Space::Poincare(_) => ball_point(&mut r, p, c, 0.5),
        Space::Euclidean => (0..p).map(|_| r.random_range(-0.5..0.5)).collect(),
    };
    let head = HyperbolicHead::new(w, bias, space, t).unwrap();
    let protos = random_prototypes(&mut r, k, n, space);
    let (backbone, width) = if with_backbone {
        let hidden = r.random_range(2..=6);
        let mut bb = TinyBackbone::new(input, hidden, p, seed);
        bb.b1.iter_mut().for_each(|v| *v = r.random_range(-0.3..0.3));
        bb.b2.iter_mut().for_each(|v| *v = r.random_range(-0.3..0.3));
        bb.scale(0.5);
        (Some(bb), input)
    } else {
        (None, p)
    };
    let x = Array2::from_shape_fn((m, width), |_| r.random_range(-1.0..1.0));
    let y = (0..m).map(|_| r.random_range(0..k)).collect();
    let model = Model::new(backbone, head, protos).unwrap();
    (model, hyperproto::data::FeatureBatch::new(x, y))
}

fn fd_matrix(a: &Array2<f64>, mut f: impl FnMut(&Array2<f64>) -> f64) -> Vec<f64> {
    let shape = a.raw_dim();
    central_diff(a.as_standard_layout().as_slice().unwrap(), FD_STEP, |v| {
        f(&Array2::from_shape_vec(shape, v.to_vec()).unwrap())
    })
}

/// Analytic dce gradients against central differences of `Model::dce_loss`.
pub fn dce_gradient_errors(seed: u64, hyperbolic: bool, with_backbone: bool) -> GradErrors {
    use hyperproto::classifier::loss_and_grad;
    let (model, batch) = random_model_case(seed, hyperbolic, with_backbone);
    let (_, g) = loss_and_grad(&model, &batch, None, 0.0).unwrap();
    let loss = |m: &Model| m.dce_loss(&batch).unwrap();

    let fd_w = fd_matrix(&model.head.w, |w| {
        let mut m = model.clone();
        m.head.w = w.clone();
        loss(&m)
    });
    let fd_b = central_diff(&model.head.bias, FD_STEP, |b| {
        let mut m = model.clone();
        m.head.bias = b.to_vec();
        loss(&m)
    });
    let p = &model.prototypes;
    let fd_p = fd_matrix(p.points(), |pts| {
        let mut m = model.clone();
        m.prototypes = PrototypeSet::new(pts.clone(), p.labels().to_vec(), p.space()).unwrap();
        loss(&m)
    });
    let backbone = match (&model.backbone, &g.backbone) {
        (Some(bb), Some(gb)) => {
            let mut worst: f64 = 0.0;
            let fd1 = fd_matrix(&bb.w1, |w| {
                let mut m = model.clone();
                m.backbone.as_mut().unwrap().w1 = w.clone();
                loss(&m)
            });
            worst = worst.max(rel_err(gb.w1.as_slice().unwrap(), &fd1));
            let fd2 = fd_matrix(&bb.w2, |w| {
                let mut m = model.clone();
                m.backbone.as_mut().unwrap().w2 = w.clone();
                loss(&m)
            });
            worst = worst.max(rel_err(gb.w2.as_slice().unwrap(), &fd2));
            let fdb1 = central_diff(bb.b1.as_slice().unwrap(), FD_STEP, |b| {
                let mut m = model.clone();
                m.backbone.as_mut().unwrap().b1 = ndarray::Array1::from(b.to_vec());
                loss(&m)
            });
            worst = worst.max(rel_err(gb.b1.as_slice().unwrap(), &fdb1));
            let fdb2 = central_diff(bb.b2.as_slice().unwrap(), FD_STEP, |b| {
                let mut m = model.clone();
                m.backbone.as_mut().unwrap().b2 = ndarray::Array1::from(b.to_vec());
                loss(&m)
            });
            worst.max(rel_err(gb.b2.as_slice().unwrap(), &fdb2))
        }
        _ => 0.0,
    };
    GradErrors {
        w: rel_err(g.w.as_slice().unwrap(), &fd_w),
        bias: rel_err(&g.bias, &fd_b),
        prototypes: rel_err(g.prototypes.as_slice().unwrap(), &fd_p),
        backbone,
    }
}

/// Random symmetric target matrix with entries in `[0.5, 3]`.
pub fn random_target<R: Rng>(r: &mut R, k: usize) -> hyperproto::hierarchy::ClassDistanceMatrix {
    let mut d = Array2::zeros((k, k));
    for i in 0..k {
        for j in i + 1..k {
            let v = r.random_range(0.5..3.0);
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    hyperproto::hierarchy::ClassDistanceMatrix::new(d, labels(k), hyperproto::hierarchy::Encoding::Lcd).unwrap()
}

/// Analytic distortion gradient against central differences.
pub fn disto_gradient_error(seed: u64, hyperbolic: bool) -> f64 {
    use hyperproto::prototypes::{disto_loss, disto_loss_grad};
    let mut r = rng(seed);
    let k = r.random_range(2..=6);
    let dim = r.random_range(1..=6);
    let space = if hyperbolic {
        Space::Poincare(curvature(r.random_range(0.01..1.0)))
    } else {
        Space::Euclidean
    };
    let p = random_prototypes(&mut r, k, dim, space);
    let d = random_target(&mut r, k);
    let (_, g) = disto_loss_grad(&p, &d).unwrap();
    let fd = fd_matrix(p.points(), |pts| {
        disto_loss(&PrototypeSet::new(pts.clone(), p.labels().to_vec(), space).unwrap(), &d).unwrap()
    });
    rel_err(g.as_slice().unwrap(), &fd)
}

/// A random tree and a predictions CSV with `k` distinct ranked labels per
/// row. Returns the tree, its oracle, the CSV text and `k`.
pub fn random_predictions_case(seed: u64) -> (Taxonomy, TreeOracle, String, usize) {
    use rand::seq::SliceRandom;
    let mut r = rng(seed);
    let (t, parent) = random_tree(&mut r, 30);
    let names = t.leaf_labels();
    let classes = names.len();
    let k = r.random_range(1..=classes.min(5));
    let rows = r.random_range(1..=60);
    let mut text = String::from("sample_id,true_label");
    for i in 1..=k {
        text.push_str(&format!(",pred{i}"));
    }
    text.push('\n');
    for row in 0..rows {
        let truth = r.random_range(0..classes);
        let mut ranked: Vec<usize> = (0..classes).collect();
        ranked.shuffle(&mut r);
        // Bias toward correct top-1 so both hits and mistakes occur.
        if r.random_bool(0.4) {
            let at = ranked.iter().position(|&c| c == truth).unwrap();
            ranked.swap(0, at);
        }
        text.push_str(&format!("s{row},{}", names[truth]));
        for &p in &ranked[..k] {
            text.push_str(&format!(",{}", names[p]));
        }
        text.push('\n');
    }
    (t, TreeOracle::new(&parent), text, k)
}

/// Library report for a predictions CSV.
pub fn library_metrics(t: &Taxonomy, text: &str, k: usize) -> hyperproto::metrics::EvalReport {
    let p = hyperproto::metrics::Predictions::read_csv(text.as_bytes()).unwrap();
    let (topk, y) = p.to_indices(t).unwrap();
    hyperproto::metrics::EvalReport::compute(&topk, &y, t, k).unwrap()
}

/// Runs the CLI in-process and returns its exit status code.
pub fn cli(args: &[String]) -> u8 {
    let mut full = vec!["hyperproto".to_string()];
    full.extend(args.iter().cloned());
    let code = hyperproto::cli::run_from(full);
    (0..=255u8).find(|&c| std::process::ExitCode::from(c) == code).unwrap()
}

pub fn argv(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

pub fn path_str(p: &std::path::Path) -> String {
    p.to_str().unwrap().to_string()
}

/// Writes a small benchmark and a one-epoch model (`model/model.bin`) to
/// `dir` and returns it.
pub fn small_inputs(dir: &std::path::Path) -> std::path::PathBuf {
    let code = cli(&argv(&[
        "generate", "--train-per-class", "20", "--test-per-class", "5", "--seed", "1", "--out", &path_str(dir),
    ]));
    assert_eq!(code, 0);
    let code = cli(&argv(&[
        "train", "--taxonomy", &path_str(&dir.join("taxonomy.txt")), "--features", &path_str(&dir.join("train.csv")),
        "--epochs", "1", "--out", &path_str(&dir.join("model")),
    ]));
    assert_eq!(code, 0);
    dir.to_path_buf()
}

/// Runs every command once, reading shared inputs from `inputs` and
/// writing below `out`.
pub fn run_every_command(inputs: &std::path::Path, out: &std::path::Path) {
    let tax = path_str(&inputs.join("taxonomy.txt"));
    let train = path_str(&inputs.join("train.csv"));
    let test = path_str(&inputs.join("test.csv"));
    let model = path_str(&inputs.join("model/model.bin"));
    let o = |name: &str| path_str(&out.join(name));
    let steps: Vec<Vec<String>> = vec![
        argv(&["generate", "--train-per-class", "10", "--test-per-class", "3", "--seed", "4", "--format", "binary", "--out", &o("gen")]),
        argv(&["encode-hierarchy", "--taxonomy", &tax, "--out", &o("lcd.csv")]),
        argv(&["encode-hierarchy", "--taxonomy", &tax, "--method", "hcd", "--hcd-epochs", "30", "--out", &o("hcd.csv")]),
        argv(&["fit-prototypes", "--taxonomy", &tax, "--steps", "50", "--out", &o("fit")]),
        argv(&["train", "--taxonomy", &tax, "--features", &train, "--hierarchy", "lcd", "--epochs", "2", "--out", &o("train")]),
        argv(&["eval", "--taxonomy", &tax, "--model", &model, "--features", &test, "--out", &o("eval")]),
        argv(&["sweep", "--taxonomy", &tax, "--features", &train, "--test-features", &test, "--epochs", "1", "--seeds", "0,1", "--out", &o("sweep.csv")]),
        argv(&["export-matrix", "--model", &model, "--taxonomy", &tax, "--out", &o("export.csv")]),
    ];
    for args in steps {
        assert_eq!(cli(&args), 0, "{args:?}");
    }
}

/// Relative paths and contents of every file below `root`, sorted.
pub fn tree_bytes(root: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    fn walk(base: &std::path::Path, dir: &std::path::Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
