mod common;

use proptest::prelude::*;
use rand::Rng;

use common::{ball_point, curvature, rng};
use hyperproto::geometry::{distance, exp_map, log_map, mobius_add, project_to_ball, BallPoint, TangentVector, BALL_EPS};

fn point(seed: u64, dim: usize, c: f64, max_scaled: f64) -> BallPoint {
    BallPoint::new(ball_point(&mut rng(seed), dim, c, max_scaled), curvature(c)).unwrap()
}

fn curvatures() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.01), Just(0.1), Just(1.0)]
}

fn close(a: &[f64], b: &[f64]) -> f64 {
    common::norm(&common::sub(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn origin_is_two_sided_identity(seed: u64, dim in 1usize..8, c in curvatures()) {
        let x = point(seed, dim, c, 0.999);
        let o = BallPoint::origin(dim, curvature(c));
        let a = mobius_add(&o, &x).unwrap();
        let b = mobius_add(&x, &o).unwrap();
        for i in 0..dim {
            prop_assert!((a.coords()[i] - x.coords()[i]).abs() <= 1e-12);
            prop_assert!((b.coords()[i] - x.coords()[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn negation_is_left_inverse(seed: u64, dim in 1usize..8, c in curvatures()) {
        let x = point(seed, dim, c, 0.9);
        prop_assert!(mobius_add(&x.neg(), &x).unwrap().norm() <= 1e-9);
    }

    #[test]
    fn mobius_add_matches_reference(seed: u64, dim in 1usize..8, c in curvatures()) {
        let x = point(seed, dim, c, 0.9);
        let y = point(seed ^ 0x5555, dim, c, 0.9);
        let lib = mobius_add(&x, &y).unwrap();
        let oracle = common::mobius_add(x.coords(), y.coords(), c);
        prop_assert!(close(lib.coords(), &oracle) <= 1e-10 / c.sqrt());
    }

    #[test]
    fn distance_is_symmetric_and_nonnegative(seed: u64, dim in 1usize..8, c in curvatures()) {
        let x = point(seed, dim, c, 0.99);
        let y = point(seed.wrapping_add(1), dim, c, 0.99);
        let dxy = distance(&x, &y).unwrap();
        prop_assert!(dxy >= 0.0);
        prop_assert!((dxy - distance(&y, &x).unwrap()).abs() <= 1e-10);
        prop_assert!(distance(&x, &x).unwrap() <= 1e-7);
    }

    #[test]
    fn distance_matches_arcosh_form(seed: u64, dim in 1usize..8, c in curvatures()) {
        let x = point(seed, dim, c, 0.95);
        let y = point(seed.wrapping_add(7), dim, c, 0.95);
        let d = distance(&x, &y).unwrap();
        let oracle = common::dist(x.coords(), y.coords(), c);
        prop_assert!((d - oracle).abs() <= 1e-8 * (1.0 + oracle), "{} vs {}", d, oracle);
    }

    #[test]
    fn triangle_inequality(seed: u64, dim in 1usize..8, c in curvatures()) {
        let x = point(seed, dim, c, 0.99);
        let y = point(seed.wrapping_add(1), dim, c, 0.99);
        let z = point(seed.wrapping_add(2), dim, c, 0.99);
        let lhs = distance(&x, &z).unwrap();
        let rhs = distance(&x, &y).unwrap() + distance(&y, &z).unwrap();
        prop_assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn euclidean_limit(seed: u64, dim in 1usize..8) {
        let c = 1e-8;
        let mut r = rng(seed);
        let x: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let e = 2.0 * close(&x, &y);
        prop_assume!(e > 1e-6);
        let d = distance(&BallPoint::new(x, curvature(c)).unwrap(), &BallPoint::new(y, curvature(c)).unwrap()).unwrap();
        prop_assert!((d - e).abs() / e <= 1e-4);
    }

    #[test]
    fn log_inverts_exp_at_origin(seed: u64, dim in 1usize..8, c in curvatures()) {
        let mut r = rng(seed);
        let v: Vec<f64> = ball_point(&mut r, dim, 1.0, 3.0);
        let x = exp_map(&TangentVector(v.clone()), None, curvature(c)).unwrap();
        let back = log_map(&x, None).unwrap();
        prop_assert!(close(back.coords(), &v) <= 1e-9 * common::norm(&v).max(1e-300));
    }

    #[test]
    fn exp_inverts_log_at_any_base(seed: u64, dim in 1usize..8, c in curvatures()) {
        let base = point(seed, dim, c, 0.9);
        let x = point(seed.wrapping_add(3), dim, c, 0.9);
        let v = log_map(&x, Some(&base)).unwrap();
        let y = exp_map(&v, Some(&base), curvature(c)).unwrap();
        prop_assert!(close(y.coords(), x.coords()) <= 1e-9 * x.norm().max(1e-300) + 1e-12);
    }

    #[test]
    fn exp_matches_reference(seed: u64, dim in 1usize..8, c in curvatures()) {
        let base = point(seed, dim, c, 0.5);
        let v = ball_point(&mut rng(seed ^ 9), dim, 1.0, 3.0);
        let lib = exp_map(&TangentVector(v.clone()), Some(&base), curvature(c)).unwrap();
        let oracle = common::exp_map(&v, base.coords(), c);
        prop_assert!(close(lib.coords(), &oracle) <= 1e-9 / c.sqrt());
    }

    #[test]
    fn projection_keeps_points_inside(seed: u64, dim in 1usize..8, c in curvatures(), scale in 0.5f64..1e6) {
        let mut r = rng(seed);
        let raw: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0) * scale).collect();
        let p = project_to_ball(raw, curvature(c)).unwrap();
        prop_assert!(c.sqrt() * p.norm() <= 1.0 - BALL_EPS + 1e-12);
    }
}

#[test]
fn near_boundary_operations_stay_finite() {
    let mut r = rng(11);
    for c in [0.01, 0.1, 1.0] {
        for _ in 0..2000 {
            let dim = r.random_range(1..8);
            let raw = ball_point(&mut r, dim, c, 1.0);
            let x = project_to_ball(raw.iter().map(|v| v * 1.5).collect(), curvature(c)).unwrap();
            let y = project_to_ball(ball_point(&mut r, dim, c, 1.0), curvature(c)).unwrap();
            let s = mobius_add(&x, &y).unwrap();
            assert!(s.coords().iter().all(|v| v.is_finite()));
            assert!(c.sqrt() * s.norm() <= 1.0 - BALL_EPS + 1e-12);
            let d = distance(&x, &y).unwrap();
            assert!(d.is_finite() && d >= 0.0);
            assert!(log_map(&x, Some(&y)).unwrap().coords().iter().all(|v| v.is_finite()));
        }
    }
}

#[test]
fn rejects_points_outside_and_bad_curvature() {
    assert!(hyperproto::geometry::Curvature::new(0.0).is_err());
    assert!(hyperproto::geometry::Curvature::new(-1.0).is_err());
    assert!(hyperproto::geometry::Curvature::new(f64::NAN).is_err());
    assert!(BallPoint::new(vec![1.0, 0.0], curvature(1.0)).is_err());
    assert!(BallPoint::new(vec![f64::INFINITY], curvature(1.0)).is_err());
}
