//! Embed a taxonomy in the Poincaré ball and compare the resulting leaf
//! distances with the LCA-height distances.

use hyperproto::hierarchy::{hcd_encode, lcd_encode, HcdConfig, Taxonomy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t = Taxonomy::balanced(&[2, 2, 3]);
    let out = hcd_encode(&t, &HcdConfig::default())?;
    let hcd = &out.matrix;
    let lcd = lcd_encode(&t);
    println!("objective {:.4} (converged: {})", out.final_objective, out.converged);

    let mut by_level = [(0.0, 0usize); 4];
    for i in 0..hcd.num_classes() {
        for j in 0..hcd.num_classes() {
            if i != j {
                let e = &mut by_level[lcd.get(i, j) as usize];
                e.0 += hcd.get(i, j);
                e.1 += 1;
            }
        }
    }
    for (level, (sum, n)) in by_level.iter().enumerate().skip(1) {
        println!("LCD {level}: mean HCD distance {:.3}", sum / *n as f64);
    }
    Ok(())
}
