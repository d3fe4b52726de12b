//! Save a trained model, reload it, and print its prototype distances next
//! to the ground-truth class distances.

use hyperproto::classifier::{train, Checkpoint, Hierarchy, TrainConfig};
use hyperproto::data::{synthetic_benchmark, SyntheticConfig};
use hyperproto::prototypes::pairwise_distances;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bench = synthetic_benchmark(&SyntheticConfig {
        branching: vec![2, 2],
        level_scales: vec![2.0, 1.0],
        train_per_class: 100,
        test_per_class: 10,
        ..SyntheticConfig::default()
    })?;
    let classes = bench.taxonomy.leaf_labels();
    let data = bench.train.to_batch(&classes)?;
    let cfg = TrainConfig {
        hierarchy: Hierarchy::Lcd,
        epochs: 20,
        ..TrainConfig::default()
    };
    let out = train(&cfg, &data, &classes, Some(&bench.taxonomy), None)?;
    let bytes = Checkpoint::new(out.model, "example".into(), out.distance_matrix).to_bytes();

    let ckpt = Checkpoint::read(&bytes[..])?;
    ckpt.check_classes(&bench.taxonomy.leaf_labels())?;
    let pd = pairwise_distances(&ckpt.model.prototypes);
    let gt = ckpt.distance_matrix.expect("trained with a hierarchy");
    for (i, label) in classes.iter().enumerate() {
        let row: Vec<String> = (0..classes.len()).map(|j| format!("{:.2}/{}", pd[[i, j]], gt.get(i, j))).collect();
        println!("{label}: {}", row.join("  "));
    }
    Ok(())
}
