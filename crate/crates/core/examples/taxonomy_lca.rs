//! Parse the shipped taxonomy, query lowest common ancestors and build the
//! LCA-height class distance matrix.

use hyperproto::hierarchy::{lcd_encode, parse_taxonomy_file, TaxonomyFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/taxonomy65.txt");
    let t = parse_taxonomy_file(path, TaxonomyFormat::Auto)?;
    println!("{} nodes, {} classes, height {}", t.len(), t.num_classes(), t.height());

    for (a, b) in [("class_A1_01", "class_A1_02"), ("class_A1_01", "class_A3_02"), ("class_A1_01", "class_C2_07")] {
        let lca = t.lca_by_label(a, b)?;
        println!("lca({a}, {b}) = {} (height {})", t.label(lca), t.node_height(lca)?);
    }

    let d = lcd_encode(&t);
    let mut counts = [0usize; 4];
    for i in 0..d.num_classes() {
        for j in 0..d.num_classes() {
            counts[d.get(i, j) as usize] += 1;
        }
    }
    println!("LCD entries by value 0..3: {counts:?}");
    println!("leaf digest {}", t.leaf_digest());
    Ok(())
}
