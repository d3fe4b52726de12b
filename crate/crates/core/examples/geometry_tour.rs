//! Poincaré ball basics: Möbius addition, distance, and the exp/log maps.

use hyperproto::geometry::{self, BallPoint, Curvature, TangentVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let c = Curvature::new(1.0)?;
    let x = BallPoint::new(vec![0.3, 0.1], c)?;
    let y = BallPoint::new(vec![-0.2, 0.5], c)?;

    let sum = geometry::mobius_add(&x, &y)?;
    println!("x ⊕ y          = {:?}", sum.coords());
    println!("(-x) ⊕ x       = {:?}", geometry::mobius_add(&x.neg(), &x)?.coords());
    println!("d(x, y)        = {:.6}", geometry::distance(&x, &y)?);
    println!("lambda_x       = {:.6}", geometry::conformal_factor(&x));

    let v = geometry::log_map(&y, Some(&x))?;
    let back = geometry::exp_map(&v, Some(&x), c)?;
    println!("exp_x(log_x y) = {:?}", back.coords());

    // Points near the boundary are far apart even when close in coordinates.
    let far = geometry::exp_map(&TangentVector(vec![4.0, 0.0]), None, c)?;
    println!("|exp_0(4 e1)|  = {:.6}, d(0, .) = {:.6}", far.norm(), geometry::distance(&BallPoint::origin(2, c), &far)?);

    // Small curvature approaches twice the Euclidean distance.
    let small = Curvature::new(1e-6)?;
    let a = BallPoint::new(vec![1.0, 0.0], small)?;
    let b = BallPoint::new(vec![0.0, 1.0], small)?;
    println!("c = 1e-6: d = {:.6} vs 2|a-b| = {:.6}", geometry::distance(&a, &b)?, 2.0 * 2f64.sqrt());
    Ok(())
}
