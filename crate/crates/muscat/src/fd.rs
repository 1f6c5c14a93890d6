//! Central finite differences for scalar and vector fields.
//!
//! These serve the validation diagnostics (the effective-PDE residual and
//! the self-check suite). Kernel unit tests keep their own inline stencils
//! so the oracles stay independent of this module.

use crate::geom::{CMat3, CVec3, RVec3};
use num_complex::Complex64;

fn shifted(x: &RVec3, axis: usize, delta: f64) -> RVec3 {
    let mut p = *x;
    p[axis] += delta;
    p
}

/// ∇f by central differences.
pub fn scalar_gradient<F>(f: &F, x: &RVec3, h: f64) -> CVec3
where
    F: Fn(&RVec3) -> Complex64,
{
    let mut g = CVec3::zeros();
    for i in 0..3 {
        g[i] = (f(&shifted(x, i, h)) - f(&shifted(x, i, -h))) / (2.0 * h);
    }
    g
}

/// 7-point Laplacian of a scalar field.
pub fn scalar_laplacian<F>(f: &F, x: &RVec3, h: f64) -> Complex64
where
    F: Fn(&RVec3) -> Complex64,
{
    let mut acc = -6.0 * f(x);
    for i in 0..3 {
        acc += f(&shifted(x, i, h)) + f(&shifted(x, i, -h));
    }
    acc / (h * h)
}

/// Hessian of a scalar field (second-order central stencils).
pub fn scalar_hessian<F>(f: &F, x: &RVec3, h: f64) -> CMat3
where
    F: Fn(&RVec3) -> Complex64,
{
    let f0 = f(x);
    let mut m = CMat3::zeros();
    for i in 0..3 {
        for j in i..3 {
            let v = if i == j {
                (f(&shifted(x, i, h)) - 2.0 * f0 + f(&shifted(x, i, -h))) / (h * h)
            } else {
                let pp = f(&shifted(&shifted(x, i, h), j, h));
                let pm = f(&shifted(&shifted(x, i, h), j, -h));
                let mp = f(&shifted(&shifted(x, i, -h), j, h));
                let mm = f(&shifted(&shifted(x, i, -h), j, -h));
                (pp - pm - mp + mm) / (4.0 * h * h)
            };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// ∇×F by central differences.
pub fn curl<F>(f: &F, x: &RVec3, h: f64) -> CVec3
where
    F: Fn(&RVec3) -> CVec3,
{
    let d = |axis: usize| {
        (f(&shifted(x, axis, h)) - f(&shifted(x, axis, -h))) * Complex64::from(1.0 / (2.0 * h))
    };
    let dx = d(0);
    let dy = d(1);
    let dz = d(2);
    CVec3::new(dy.z - dz.y, dz.x - dx.z, dx.y - dy.x)
}

/// ∇·F by central differences.
pub fn divergence<F>(f: &F, x: &RVec3, h: f64) -> Complex64
where
    F: Fn(&RVec3) -> CVec3,
{
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..3 {
        acc += (f(&shifted(x, i, h))[i] - f(&shifted(x, i, -h))[i]) / (2.0 * h);
    }
    acc
}

/// All second partials ∂ᵢ∂ⱼF of a vector field, evaluated with 19 field
/// samples (center, 6 face, 12 edge points).
pub fn vector_second_partials<F>(f: &F, x: &RVec3, h: f64) -> [[CVec3; 3]; 3]
where
    F: Fn(&RVec3) -> CVec3,
{
    let center = f(x);
    let mut face = [[CVec3::zeros(); 2]; 3];
    for i in 0..3 {
        face[i][0] = f(&shifted(x, i, h));
        face[i][1] = f(&shifted(x, i, -h));
    }
    let mut out = [[CVec3::zeros(); 3]; 3];
    for i in 0..3 {
        out[i][i] =
            (face[i][0] - center * Complex64::from(2.0) + face[i][1]) * Complex64::from(1.0 / (h * h));
        for j in (i + 1)..3 {
            let pp = f(&shifted(&shifted(x, i, h), j, h));
            let pm = f(&shifted(&shifted(x, i, h), j, -h));
            let mp = f(&shifted(&shifted(x, i, -h), j, h));
            let mm = f(&shifted(&shifted(x, i, -h), j, -h));
            let mixed = (pp - pm - mp + mm) * Complex64::from(1.0 / (4.0 * h * h));
            out[i][j] = mixed;
            out[j][i] = mixed;
        }
    }
    out
}

/// ∇×∇×F = ∇(∇·F) − ∇²F assembled from the second partials.
pub fn curl_curl<F>(f: &F, x: &RVec3, h: f64) -> CVec3
where
    F: Fn(&RVec3) -> CVec3,
{
    let d2 = vector_second_partials(f, x, h);
    let mut out = CVec3::zeros();
    for i in 0..3 {
        let mut grad_div = Complex64::new(0.0, 0.0);
        let mut laplace = Complex64::new(0.0, 0.0);
        for j in 0..3 {
            grad_div += d2[i][j][j]; // ∂i ∂j F_j
            laplace += d2[j][j][i]; // ∂j² F_i
        }
        out[i] = grad_div - laplace;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // Polynomial test field with known derivatives.
    fn poly(x: &RVec3) -> CVec3 {
        CVec3::new(
            c(x.x * x.x * x.y, x.z),
            c(x.y * x.z, x.x * x.y * x.z),
            c(x.z * x.z, x.x * x.x),
        )
    }

    #[test]
    fn gradient_of_quadratic() {
        let f = |p: &RVec3| c(p.x * p.x + 3.0 * p.y, 2.0 * p.z);
        let g = scalar_gradient(&f, &RVec3::new(1.0, 2.0, -1.0), 1e-5);
        assert_relative_eq!(g.x.re, 2.0, max_relative = 1e-8);
        assert_relative_eq!(g.y.re, 3.0, max_relative = 1e-8);
        assert_relative_eq!(g.z.im, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn laplacian_and_hessian_of_quadratic() {
        let f = |p: &RVec3| c(p.x * p.x - 2.0 * p.y * p.y + p.x * p.z, 0.0);
        let x = RVec3::new(0.3, -0.2, 0.9);
        let lap = scalar_laplacian(&f, &x, 1e-4);
        assert_relative_eq!(lap.re, 2.0 - 4.0, max_relative = 1e-6);
        let hess = scalar_hessian(&f, &x, 1e-4);
        assert_relative_eq!(hess[(0, 0)].re, 2.0, max_relative = 1e-6);
        assert_relative_eq!(hess[(0, 2)].re, 1.0, max_relative = 1e-6);
        assert_relative_eq!(hess[(1, 1)].re, -4.0, max_relative = 1e-6);
    }

    #[test]
    fn curl_of_polynomial() {
        // curl(x²y, yz, z²)_x = -y; _y = 0; _z = -x² (real parts).
        let x = RVec3::new(0.7, -0.4, 0.2);
        let curl_v = curl(&poly, &x, 1e-5);
        assert_relative_eq!(curl_v.x.re, -x.y, max_relative = 1e-7);
        assert_relative_eq!(curl_v.z.re, -x.x * x.x, max_relative = 1e-7);
    }

    #[test]
    fn curl_curl_consistent_with_nested_curl() {
        let x = RVec3::new(0.4, 0.3, -0.6);
        let direct = curl_curl(&poly, &x, 1e-3);
        let nested = curl(&|p: &RVec3| curl(&poly, p, 1e-3), &x, 1e-3);
        for i in 0..3 {
            assert_relative_eq!(direct[i].re, nested[i].re, epsilon = 1e-5);
            assert_relative_eq!(direct[i].im, nested[i].im, epsilon = 1e-5);
        }
    }

    #[test]
    fn divergence_of_linear_field() {
        let f = |p: &RVec3| CVec3::new(c(2.0 * p.x, 0.0), c(-p.y, 0.0), c(3.0 * p.z, 0.0));
        let div = divergence(&f, &RVec3::new(1.0, 1.0, 1.0), 1e-5);
        assert_relative_eq!(div.re, 4.0, max_relative = 1e-9);
    }
}
