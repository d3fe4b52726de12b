//! Fit prototypes to the LCA-height matrix in hyperbolic and Euclidean mode
//! and report the distortion of each.

use hyperproto::hierarchy::{lcd_encode, Taxonomy};
use hyperproto::prototypes::{fit_prototypes, FitConfig, Mode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = lcd_encode(&Taxonomy::balanced(&[2, 2, 3]));
    for (mode, curvature) in [(Mode::Hyperbolic, 1.0), (Mode::Hyperbolic, 0.01), (Mode::Euclidean, 0.01)] {
        for dim in [2, 16] {
            let cfg = FitConfig {
                mode,
                dim,
                curvature,
                ..FitConfig::default()
            };
            let (_, report, _) = fit_prototypes(&d, &cfg)?;
            println!(
                "{mode:?} c={curvature} dim={dim:2}: distortion {:.4}, surrogate {:.3e}, scale {:.3}",
                report.raw_distortion, report.surrogate_loss, report.scale
            );
        }
    }
    Ok(())
}
