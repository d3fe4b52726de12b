mod common;

use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

use common::{curvature, labels, proba_row, random_model_case, random_prototypes, rng};
use hyperproto::classifier::{
    loss_and_grad, total_loss, train, Checkpoint, ClassifierError, Hierarchy, HyperbolicHead, Model, TrainConfig,
};
use hyperproto::data::{synthetic_benchmark, FeatureBatch, SyntheticConfig};
use hyperproto::geometry::Space;
use hyperproto::hierarchy::{lcd_encode, Taxonomy};
use hyperproto::prototypes::{disto_loss, Mode};

fn small_benchmark(seed: u64) -> (Taxonomy, FeatureBatch, Vec<String>) {
    let cfg = SyntheticConfig { train_per_class: 40, test_per_class: 1, seed, ..Default::default() };
    let b = synthetic_benchmark(&cfg).unwrap();
    let classes = b.taxonomy.leaf_labels();
    let batch = b.train.to_batch(&classes).unwrap();
    (b.taxonomy, batch, classes)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn head_matches_composed_reference(seed: u64, hyperbolic: bool) {
        let (model, batch) = random_model_case(seed, hyperbolic, false);
        let z = hyperproto::classifier::embed(&model.head, &batch.x).unwrap();
        for (i, row) in batch.x.rows().into_iter().enumerate() {
            let oracle = common::embed(&model.head, row.as_slice().unwrap());
            let got = z.row(i).to_vec();
            prop_assert!(common::norm(&common::sub(&got, &oracle)) <= 1e-9);
        }
    }

    #[test]
    fn proba_matches_reference_softmax(seed: u64, hyperbolic: bool) {
        let (model, batch) = random_model_case(seed, hyperbolic, false);
        let p = model.predict_proba(&batch.x).unwrap();
        for (i, row) in batch.x.rows().into_iter().enumerate() {
            let oracle = proba_row(&model, row.as_slice().unwrap());
            let sum: f64 = p.row(i).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            for k in 0..oracle.len() {
                prop_assert!(p[[i, k]] >= 0.0);
                prop_assert!((p[[i, k]] - oracle[k]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn dce_is_mean_negative_log_proba(seed: u64, hyperbolic: bool, backbone: bool) {
        let (model, batch) = random_model_case(seed, hyperbolic, backbone);
        let p = model.predict_proba(&batch.x).unwrap();
        let nll = -batch.y.iter().enumerate().map(|(i, &y)| p[[i, y]].ln()).sum::<f64>() / batch.len() as f64;
        prop_assert!((model.dce_loss(&batch).unwrap() - nll).abs() <= 1e-10);
    }

    #[test]
    fn argmax_is_nearest_prototype(seed: u64, hyperbolic: bool) {
        let (model, batch) = random_model_case(seed, hyperbolic, false);
        let pred = model.predict(&batch.x).unwrap();
        for (i, row) in batch.x.rows().into_iter().enumerate() {
            let z = common::embed(&model.head, row.as_slice().unwrap());
            let p = &model.prototypes;
            let d: Vec<f64> = (0..p.num_classes()).map(|k| common::space_dist(p.space(), &z, p.point(k))).collect();
            prop_assert!(d[pred[i]] <= d.iter().copied().fold(f64::INFINITY, f64::min) + 1e-12);
        }
    }

    #[test]
    fn topk_is_sorted_by_distance(seed: u64, hyperbolic: bool) {
        let (model, batch) = random_model_case(seed, hyperbolic, false);
        let k = model.num_classes();
        let top = model.predict_topk(&batch.x, k).unwrap();
        for (i, row) in batch.x.rows().into_iter().enumerate() {
            let z = common::embed(&model.head, row.as_slice().unwrap());
            let p = &model.prototypes;
            let mut idx: Vec<usize> = (0..k).collect();
            let d: Vec<f64> = idx.iter().map(|&c| common::space_dist(p.space(), &z, p.point(c))).collect();
            idx.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap().then(a.cmp(&b)));
            for j in 0..k {
                prop_assert!((d[top[i][j]] - d[idx[j]]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn higher_temperature_flattens(seed: u64, hyperbolic: bool) {
        let (model, batch) = random_model_case(seed, hyperbolic, false);
        let with_t = |t: f64| {
            let h = &model.head;
            let head = HyperbolicHead::new(h.w.clone(), h.bias.clone(), h.space(), t).unwrap();
            Model::new(None, head, model.prototypes.clone()).unwrap().predict_proba(&batch.x).unwrap()
        };
        let (lo, hi) = (with_t(0.1), with_t(1.0));
        for i in 0..batch.len() {
            let max = |p: &Array2<f64>| p.row(i).iter().copied().fold(0.0, f64::max);
            prop_assert!(max(&hi) <= max(&lo) + 1e-12);
        }
    }

    #[test]
    fn total_is_sum_of_terms(seed: u64, hyperbolic: bool, weight in 0.0f64..5.0) {
        let (model, batch) = random_model_case(seed, hyperbolic, false);
        let d = common::random_target(&mut rng(seed ^ 1), model.num_classes());
        let dce = model.dce_loss(&batch).unwrap();
        let disto = disto_loss(&model.prototypes, &d).unwrap();
        let total = total_loss(&model.head, &model.prototypes, &batch, &d, weight).unwrap();
        prop_assert!((total - (dce + weight * disto)).abs() <= 1e-12);
        let (parts, _) = loss_and_grad(&model, &batch, Some(&d), weight).unwrap();
        prop_assert!((parts.total - total).abs() <= 1e-10);
    }
}

#[test]
fn single_class_and_uniform_cases() {
    let mut r = rng(3);
    for hyperbolic in [true, false] {
        let space = if hyperbolic { Space::Poincare(curvature(0.5)) } else { Space::Euclidean };
        let x = Array2::from_shape_fn((5, 3), |_| r.random_range(-1.0..1.0));
        let head = HyperbolicHead::init(3, 2, space, 0.1, 0).unwrap();
        let one = Model::new(None, head.clone(), random_prototypes(&mut r, 1, 2, space)).unwrap();
        let p = one.predict_proba(&x).unwrap();
        assert!(p.iter().all(|v| (v - 1.0).abs() <= 1e-12));
        assert!(one.dce_loss(&FeatureBatch::new(x.clone(), vec![0; 5])).unwrap().abs() <= 1e-12);

        // Identical prototypes give a uniform distribution.
        let k = 4;
        let pts = Array2::from_shape_fn((k, 2), |(_, j)| 0.1 * j as f64);
        let same = hyperproto::prototypes::PrototypeSet::new(pts, labels(k), space).unwrap();
        let m = Model::new(None, head, same).unwrap();
        let p = m.predict_proba(&x).unwrap();
        assert!(p.iter().all(|v| (v - 0.25).abs() <= 1e-12));
        let dce = m.dce_loss(&FeatureBatch::new(x.clone(), vec![1; 5])).unwrap();
        assert!((dce - (k as f64).ln()).abs() <= 1e-12);
    }
}

#[test]
fn pairwise_odds_follow_distance_gap() {
    let (model, batch) = random_model_case(17, true, false);
    let p = model.predict_proba(&batch.x).unwrap();
    let protos = &model.prototypes;
    let t = model.head.temperature();
    for (i, row) in batch.x.rows().into_iter().enumerate() {
        let z = common::embed(&model.head, row.as_slice().unwrap());
        let d: Vec<f64> = (0..protos.num_classes()).map(|k| common::space_dist(protos.space(), &z, protos.point(k))).collect();
        let s = 1.0 / (1.0 + ((d[0] - d[1]) / t).exp());
        let pair = p[[i, 0]] / (p[[i, 0]] + p[[i, 1]]);
        assert!((pair - s).abs() <= 1e-9);
    }
}

#[test]
fn separable_two_class_problem_is_learned() {
    let mut r = rng(5);
    let m = 200;
    let x = Array2::from_shape_fn((m, 4), |(i, j)| {
        let centre = if i % 2 == 0 { 1.5 } else { -1.5 };
        (if j == 0 { centre } else { 0.0 }) + 0.3 * r.random_range(-1.0..1.0)
    });
    let y = (0..m).map(|i| i % 2).collect();
    let data = FeatureBatch::new(x, y);
    for mode in [Mode::Hyperbolic, Mode::Euclidean] {
        let cfg = TrainConfig { mode, epochs: 200, dim: 4, ..Default::default() };
        let out = train(&cfg, &data, &labels(2), None, None).unwrap();
        let acc = out.history.last().unwrap().accuracy;
        assert!(acc >= 0.99, "{mode:?}: {acc}");
    }
}

#[test]
fn full_batch_history_does_not_increase() {
    let (t, data, classes) = small_benchmark(2);
    for hierarchy in [Hierarchy::None, Hierarchy::Lcd] {
        let cfg = TrainConfig { hierarchy, batch_size: data.len(), epochs: 40, ..Default::default() };
        let out = train(&cfg, &data, &classes, Some(&t), None).unwrap();
        for w in out.history.windows(2) {
            assert!(w[1].total_loss <= w[0].total_loss + 1e-3, "{hierarchy:?}: {:?}", w);
        }
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let (t, data, classes) = small_benchmark(1);
    let cfg = TrainConfig { hierarchy: Hierarchy::Lcd, epochs: 3, ..Default::default() };
    let a = train(&cfg, &data, &classes, Some(&t), None).unwrap();
    let b = train(&cfg, &data, &classes, Some(&t), None).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.history, b.history);
    let c = train(&TrainConfig { seed: 1, ..cfg }, &data, &classes, Some(&t), None).unwrap();
    assert_ne!(a.model, c.model);
}

#[test]
fn hierarchy_needs_a_source() {
    let (_, data, classes) = small_benchmark(0);
    let cfg = TrainConfig { hierarchy: Hierarchy::Lcd, epochs: 1, ..Default::default() };
    let e = train(&cfg, &data, &classes, None, None).unwrap_err();
    assert!(matches!(e, ClassifierError::InvalidConfig { field: "hierarchy", .. }), "{e}");
}

#[test]
fn invalid_configs_name_the_field() {
    let (_, data, classes) = small_benchmark(0);
    let cases: [(TrainConfig, &str); 4] = [
        (TrainConfig { curvature: -1.0, ..Default::default() }, "curvature"),
        (TrainConfig { temperature: 0.0, ..Default::default() }, "temperature"),
        (TrainConfig { batch_size: 0, ..Default::default() }, "batch_size"),
        (TrainConfig { learning_rate: f64::NAN, ..Default::default() }, "learning_rate"),
    ];
    for (cfg, name) in cases {
        match train(&cfg, &data, &classes, None, None) {
            Err(ClassifierError::InvalidConfig { field, .. }) => assert_eq!(field, name),
            other => panic!("{name}: {other:?}"),
        }
    }
}

#[test]
fn checkpoint_round_trips_and_detects_corruption() {
    let (t, data, classes) = small_benchmark(4);
    let cfg = TrainConfig { hierarchy: Hierarchy::Lcd, epochs: 2, backbone_hidden: 5, feature_dim: 6, ..Default::default() };
    let out = train(&cfg, &data, &classes, Some(&t), None).unwrap();
    let ck = Checkpoint::new(out.model.clone(), "abc".into(), out.distance_matrix.clone());
    let bytes = ck.to_bytes();
    let back = Checkpoint::read(bytes.as_slice()).unwrap();
    assert_eq!(back.model, out.model);
    assert_eq!(back.config_hash, "abc");
    assert_eq!(back.distance_matrix.as_ref().unwrap().matrix(), lcd_encode(&t).matrix());
    back.check_classes(&classes).unwrap();
    let mut other = classes.clone();
    other.swap(0, 1);
    assert!(back.check_classes(&other).is_err());

    let mut bad = bytes.clone();
    let mid = bad.len() / 2;
    bad[mid] ^= 0x40;
    assert!(Checkpoint::read(bad.as_slice()).is_err());
    assert!(Checkpoint::read(&bytes[..bytes.len() - 1]).is_err());
}
