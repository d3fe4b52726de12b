//! Accuracy and hierarchy metrics over a small curvature x dimension grid.

use hyperproto::classifier::{train, Hierarchy, TrainConfig};
use hyperproto::data::{synthetic_benchmark, SyntheticConfig};
use hyperproto::metrics::EvalReport;
use rayon::prelude::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bench = synthetic_benchmark(&SyntheticConfig {
        train_per_class: 200,
        test_per_class: 100,
        ..SyntheticConfig::default()
    })?;
    let classes = bench.taxonomy.leaf_labels();
    let train_set = bench.train.to_batch(&classes)?;
    let test_set = bench.test.to_batch(&classes)?;

    let grid: Vec<(f64, usize)> = [0.01, 0.1, 1.0]
        .iter()
        .flat_map(|&c| [2, 8, 16].map(|d| (c, d)))
        .collect();
    let rows: Vec<String> = grid
        .par_iter()
        .map(|&(curvature, dim)| {
            let cfg = TrainConfig {
                hierarchy: Hierarchy::Lcd,
                curvature,
                dim,
                epochs: 10,
                ..TrainConfig::default()
            };
            let out = train(&cfg, &train_set, &classes, Some(&bench.taxonomy), None).expect("training");
            let topk = out.model.predict_topk(&test_set.x, 5).expect("prediction");
            let r = EvalReport::compute(&topk, &test_set.y, &bench.taxonomy, 5).expect("metrics");
            format!("{curvature},{dim},{:.4},{:.3},{:.3}", r.accuracy, r.mistake_severity.unwrap_or(f64::NAN), r.hd_at_k)
        })
        .collect();
    println!("c,dim,accuracy,mistake_severity,hd_at_5");
    for row in rows {
        println!("{row}");
    }
    Ok(())
}
