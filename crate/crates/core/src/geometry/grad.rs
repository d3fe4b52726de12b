//! Vector-Jacobian products for the ball kernels.
//!
//! Each `*_vjp` takes the forward inputs and an upstream gradient `g` and
//! accumulates the pulled-back gradients into the provided buffers.

use super::kernels::{artanh_ratio, dot, max_norm, norm, norm_sq};

/// `(t sech^2 t - tanh t) / t^3`, with its series near zero.
fn phi_over_t3(t: f64) -> f64 {
    if t.abs() < 1e-3 {
        let t2 = t * t;
        -2.0 / 3.0 + 8.0 / 15.0 * t2
    } else {
        let ch = t.cosh();
        (t / (ch * ch) - t.tanh()) / (t * t * t)
    }
}

/// Pullback through [`super::kernels::project_in_place`]. `pre` is the
/// vector before clipping; `clipped_from` is what the projection returned.
pub fn project_vjp(pre: &[f64], clipped_from: Option<f64>, c: f64, g: &[f64], gx: &mut [f64]) {
    match clipped_from {
        None => gx.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        Some(n) => {
            let k = max_norm(c) / n;
            let radial = dot(g, pre) / (n * n);
            for i in 0..pre.len() {
                gx[i] += k * (g[i] - radial * pre[i]);
            }
        }
    }
}

/// Pullback through `x ⊕_c y`.
pub fn mobius_add_vjp(
    x: &[f64],
    y: &[f64],
    c: f64,
    g: &[f64],
    gx: &mut [f64],
    gy: &mut [f64],
) {
    let xy = dot(x, y);
    let x2 = norm_sq(x);
    let y2 = norm_sq(y);
    let a = 1.0 + 2.0 * c * xy + c * y2;
    let b = 1.0 - c * x2;
    let den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
    let gdotx = dot(g, x);
    let gdoty = dot(g, y);
    // g . (x ⊕ y)
    let gdotout = (a * gdotx + b * gdoty) / den;
    let k = gdotout / den;
    for i in 0..x.len() {
        gx[i] += (a * g[i] + 2.0 * c * gdotx * y[i] - 2.0 * c * gdoty * x[i]) / den
            - k * (2.0 * c * y[i] + 2.0 * c * c * y2 * x[i]);
        gy[i] += (b * g[i] + 2.0 * c * gdotx * (x[i] + y[i])) / den
            - k * (2.0 * c * x[i] + 2.0 * c * c * x2 * y[i]);
    }
}

/// Pullback through the origin exponential map.
pub fn exp0_vjp(v: &[f64], c: f64, g: &[f64], gv: &mut [f64]) {
    let r = norm(v);
    let t = c.sqrt() * r;
    let f = if t == 0.0 { 1.0 } else { t.tanh() / t };
    let k = c * phi_over_t3(t) * dot(v, g);
    for i in 0..v.len() {
        gv[i] += f * g[i] + k * v[i];
    }
}

/// Pullback through [`super::kernels::mobius_matvec`]. `mx` must be the
/// product `M x` recorded by the forward pass. `gm` is row-major like `m`.
pub fn mobius_matvec_vjp(
    m: &[f64],
    x: &[f64],
    mx: &[f64],
    c: f64,
    g: &[f64],
    gm: &mut [f64],
    gx: &mut [f64],
) {
    let nu = norm(mx);
    if nu == 0.0 {
        return;
    }
    let n = x.len();
    let sc = c.sqrt();
    let nx = norm(x);
    let y = sc * nx;
    let rho = sc * artanh_ratio(y);
    let t = nu * rho;
    let h = t.tanh() / (sc * nu);
    let q = dot(g, mx);
    let ku = q * rho * rho * rho * phi_over_t3(t) / sc;
    // (sc*nx/(1 - c nx^2) - artanh(sc nx)) / nx^3
    let psi = if y < 1e-4 {
        sc * sc * sc * (2.0 / 3.0 + 0.8 * y * y)
    } else {
        (y / (1.0 - y * y) - y.atanh()) / (nx * nx * nx)
    };
    let ch = t.cosh();
    let kx = q * psi / (sc * ch * ch);

    let gu: Vec<f64> = g.iter().zip(mx).map(|(gi, ui)| h * gi + ku * ui).collect();
    for (r, gur) in gu.iter().enumerate() {
        let row = &m[r * n..(r + 1) * n];
        let grow = &mut gm[r * n..(r + 1) * n];
        for j in 0..n {
            grow[j] += gur * x[j];
            gx[j] += gur * row[j];
        }
    }
    for j in 0..n {
        gx[j] += kx * x[j];
    }
}

#[cfg(test)]
mod tests {
    use super::super::kernels::*;
    use super::*;

    fn fd<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|i| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[i] += h;
                m[i] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn mobius_add_pullback_matches_fd() {
        let c = 0.7;
        let x = [0.2, -0.4, 0.1];
        let y = [-0.3, 0.25, 0.5];
        let g = [0.3, -1.1, 0.8];
        let (mut gx, mut gy) = (vec![0.0; 3], vec![0.0; 3]);
        mobius_add_vjp(&x, &y, c, &g, &mut gx, &mut gy);
        let f = |xx: &[f64], yy: &[f64]| {
            let mut o = [0.0; 3];
            mobius_add(xx, yy, c, &mut o);
            dot(&o, &g)
        };
        close(&gx, &fd(|p| f(p, &y), &x), 1e-7);
        close(&gy, &fd(|p| f(&x, p), &y), 1e-7);
    }

    #[test]
    fn exp0_pullback_matches_fd_including_tiny_vectors() {
        for v in [[0.4, -1.3], [1e-6, 2e-6]] {
            let g = [0.7, 0.2];
            let mut gv = vec![0.0; 2];
            exp0_vjp(&v, 0.3, &g, &mut gv);
            let num = fd(
                |p| {
                    let mut o = [0.0; 2];
                    exp0(p, 0.3, &mut o);
                    dot(&o, &g)
                },
                &v,
            );
            close(&gv, &num, 1e-7);
        }
    }

    #[test]
    fn matvec_pullback_matches_fd() {
        let c = 0.5;
        let m = [0.3, -0.2, 0.9, 0.1, 0.4, -0.7];
        let x = [0.3, 0.5, -0.2];
        let g = [1.2, -0.4];
        let f = |mm: &[f64], xx: &[f64]| {
            let (mut mx, mut o) = ([0.0; 2], [0.0; 2]);
            mobius_matvec(mm, xx, c, &mut mx, &mut o);
            dot(&o, &g)
        };
        let mut mx = [0.0; 2];
        let mut out = [0.0; 2];
        mobius_matvec(&m, &x, c, &mut mx, &mut out);
        let (mut gm, mut gx) = (vec![0.0; 6], vec![0.0; 3]);
        mobius_matvec_vjp(&m, &x, &mx, c, &g, &mut gm, &mut gx);
        close(&gm, &fd(|p| f(p, &x), &m), 1e-6);
        close(&gx, &fd(|p| f(&m, p), &x), 1e-6);
    }

    #[test]
    fn distance_gradient_matches_fd() {
        let c = 1.3;
        let x = [0.1, 0.3, -0.2];
        let y = [-0.4, 0.1, 0.3];
        let (mut gx, mut gy) = (vec![0.0; 3], vec![0.0; 3]);
        dist_grad(&x, &y, c, 1.0, &mut gx, &mut gy);
        close(&gx, &fd(|p| dist(p, &y, c), &x), 1e-6);
        close(&gy, &fd(|p| dist(&x, p, c), &y), 1e-6);
    }

    #[test]
    fn projection_pullback_matches_fd() {
        let c = 1.0;
        let x = [1.5, -0.5];
        let g = [0.4, 0.9];
        let mut p = x;
        let clipped = project_in_place(&mut p, c);
        assert!(clipped.is_some());
        let mut gx = vec![0.0; 2];
        project_vjp(&x, clipped, c, &g, &mut gx);
        let num = fd(
            |q| {
                let mut v = q.to_vec();
                project_in_place(&mut v, c);
                dot(&v, &g)
            },
            &x,
        );
        close(&gx, &num, 1e-7);
    }
}
