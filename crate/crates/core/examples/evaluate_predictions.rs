//! Score a predictions CSV against a taxonomy without any model.

use hyperproto::hierarchy::Taxonomy;
use hyperproto::metrics::{EvalReport, Predictions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t = Taxonomy::balanced(&[2, 2]);
    let csv = "sample_id,true_label,pred1,pred2\n\
               s1,c0_0,c0_0,c0_1\n\
               s2,c0_1,c0_0,c0_1\n\
               s3,c1_0,c0_1,c1_1\n";
    let preds = Predictions::read_csv(csv.as_bytes())?;
    let (topk, y) = preds.to_indices(&t)?;
    let report = EvalReport::compute(&topk, &y, &t, 2)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
