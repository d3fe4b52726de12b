//! Train the prototype classifier on the synthetic benchmark with and
//! without the LCD regularizer.

use hyperproto::classifier::{train, Hierarchy, TrainConfig};
use hyperproto::data::{synthetic_benchmark, SyntheticConfig};
use hyperproto::metrics::EvalReport;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bench = synthetic_benchmark(&SyntheticConfig::default())?;
    let classes = bench.taxonomy.leaf_labels();
    let train_set = bench.train.to_batch(&classes)?;
    let test_set = bench.test.to_batch(&classes)?;

    for hierarchy in [Hierarchy::None, Hierarchy::Lcd] {
        let cfg = TrainConfig {
            hierarchy,
            ..TrainConfig::default()
        };
        let out = train(&cfg, &train_set, &classes, Some(&bench.taxonomy), None)?;
        let last = out.history.last().expect("at least one epoch");
        let topk = out.model.predict_topk(&test_set.x, 5)?;
        let r = EvalReport::compute(&topk, &test_set.y, &bench.taxonomy, 5)?;
        println!(
            "{hierarchy:?}: train loss {:.4}, test accuracy {:.4}, MS {:?}, HD@5 {:.3}",
            last.total_loss, r.accuracy, r.mistake_severity, r.hd_at_k
        );
    }
    Ok(())
}
