//! Slice-level forward kernels for the Poincaré ball.
//!
//! These are the allocation-free building blocks behind the typed API in
//! [`crate::geometry`]. Every function takes the raw curvature `c > 0`; callers
//! are responsible for shape agreement.

/// Boundary margin in the unit-radius coordinate `sqrt(c) * x`.
pub const BALL_EPS: f64 = 1e-5;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// Largest Euclidean norm a ball point may have at curvature `c`.
#[inline]
pub fn max_norm(c: f64) -> f64 {
    (1.0 - BALL_EPS) / c.sqrt()
}

/// Radially clips `x` onto the ball margin. Returns the pre-clip norm when a
/// clip happened, `None` otherwise.
pub fn project_in_place(x: &mut [f64], c: f64) -> Option<f64> {
    let n = norm(x);
    let r = max_norm(c);
    if n > r {
        let k = r / n;
        x.iter_mut().for_each(|v| *v *= k);
        Some(n)
    } else {
        None
    }
}

/// Möbius addition `x ⊕_c y` written into `out` (no projection).
pub fn mobius_add(x: &[f64], y: &[f64], c: f64, out: &mut [f64]) {
    let xy = dot(x, y);
    let x2 = norm_sq(x);
    let y2 = norm_sq(y);
    let a = 1.0 + 2.0 * c * xy + c * y2;
    let b = 1.0 - c * x2;
    let den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = (a * xi + b * yi) / den;
    }
}

/// Norm of `(-x) ⊕_c y`, evaluated component-wise so that nearby points keep
/// full absolute precision.
pub fn mobius_diff_norm(x: &[f64], y: &[f64], c: f64) -> f64 {
    let xy = -dot(x, y);
    let x2 = norm_sq(x);
    let y2 = norm_sq(y);
    let a = 1.0 + 2.0 * c * xy + c * y2;
    let b = 1.0 - c * x2;
    let den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
    let num: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let v = -a * xi + b * yi;
            v * v
        })
        .sum();
    num.sqrt() / den
}

/// Poincaré distance `2/sqrt(c) * artanh(sqrt(c) * |(-x) ⊕_c y|)`.
pub fn dist(x: &[f64], y: &[f64], c: f64) -> f64 {
    let sc = c.sqrt();
    let arg = (sc * mobius_diff_norm(x, y, c)).min(1.0 - 1e-16);
    2.0 / sc * arg.atanh()
}

/// Accumulates `scale * ∂d/∂x` and `scale * ∂d/∂y` of [`dist`].
///
/// Uses the equivalent closed form `arcosh(1 + 2c|x-y|^2 / (αβ)) / sqrt(c)`
/// with `α = 1 - c|x|^2`, `β = 1 - c|y|^2`. Coincident points yield zero.
pub fn dist_grad(x: &[f64], y: &[f64], c: f64, scale: f64, gx: &mut [f64], gy: &mut [f64]) {
    let alpha = 1.0 - c * norm_sq(x);
    let beta = 1.0 - c * norm_sq(y);
    let delta: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    if delta == 0.0 {
        return;
    }
    let gm1 = 2.0 * c * delta / (alpha * beta);
    let dd_dg = 1.0 / (c.sqrt() * (gm1 * (gm1 + 2.0)).sqrt());
    let k = scale * dd_dg * 4.0 * c / (alpha * beta);
    let kx = c * delta / alpha;
    let ky = c * delta / beta;
    for i in 0..x.len() {
        let diff = x[i] - y[i];
        gx[i] += k * (diff + kx * x[i]);
        gy[i] += k * (-diff + ky * y[i]);
    }
}

pub fn euclid_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn euclid_dist_grad(x: &[f64], y: &[f64], scale: f64, gx: &mut [f64], gy: &mut [f64]) {
    let d = euclid_dist(x, y);
    if d == 0.0 {
        return;
    }
    let k = scale / d;
    for i in 0..x.len() {
        let diff = k * (x[i] - y[i]);
        gx[i] += diff;
        gy[i] -= diff;
    }
}

/// Conformal factor `2 / (1 - c|x|^2)`.
#[inline]
pub fn lambda(x: &[f64], c: f64) -> f64 {
    2.0 / (1.0 - c * norm_sq(x))
}

/// Exponential map at the origin, `tanh(sqrt(c)|v|) v / (sqrt(c)|v|)`.
pub fn exp0(v: &[f64], c: f64, out: &mut [f64]) {
    let r = norm(v);
    if r == 0.0 {
        out.iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    let t = c.sqrt() * r;
    let k = t.tanh() / t;
    for (o, vi) in out.iter_mut().zip(v) {
        *o = k * vi;
    }
}

/// Exponential map at `base` (no projection).
pub fn exp_map(v: &[f64], base: &[f64], c: f64, out: &mut [f64]) {
    let r = norm(v);
    if r == 0.0 {
        out.copy_from_slice(base);
        return;
    }
    let sc = c.sqrt();
    let k = (sc * lambda(base, c) * r / 2.0).tanh() / (sc * r);
    let step: Vec<f64> = v.iter().map(|vi| k * vi).collect();
    mobius_add(base, &step, c, out);
}

/// Logarithmic map at `base`, the inverse of [`exp_map`].
pub fn log_map(x: &[f64], base: &[f64], c: f64, out: &mut [f64]) {
    let neg: Vec<f64> = base.iter().map(|b| -b).collect();
    let mut w = vec![0.0; x.len()];
    mobius_add(&neg, x, c, &mut w);
    let wn = norm(&w);
    if wn == 0.0 {
        out.iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    let sc = c.sqrt();
    let k = 2.0 / (sc * lambda(base, c)) * (sc * wn).min(1.0 - 1e-16).atanh() / wn;
    for (o, wi) in out.iter_mut().zip(&w) {
        *o = k * wi;
    }
}

/// `artanh(y) / y` with its series near zero.
#[inline]
pub(crate) fn artanh_ratio(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        1.0 + y * y / 3.0
    } else {
        y.min(1.0 - 1e-16).atanh() / y
    }
}

/// Möbius matrix-vector product `M ⊗_c x` for a row-major `rows x x.len()`
/// matrix. Returns the origin when `M x = 0`. Writes the plain product `M x`
/// into `mx` for reuse by the backward pass.
pub fn mobius_matvec(m: &[f64], x: &[f64], c: f64, mx: &mut [f64], out: &mut [f64]) {
    let n = x.len();
    for (r, u) in mx.iter_mut().enumerate() {
        *u = dot(&m[r * n..(r + 1) * n], x);
    }
    let nu = norm(mx);
    if nu == 0.0 {
        out.iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    let sc = c.sqrt();
    let rho = sc * artanh_ratio(sc * norm(x));
    let t = nu * rho;
    let h = t.tanh() / (sc * nu);
    for (o, u) in out.iter_mut().zip(mx.iter()) {
        *o = h * u;
    }
}
