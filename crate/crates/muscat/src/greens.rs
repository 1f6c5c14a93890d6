//! Free-space Helmholtz kernels.
//!
//! The scalar Green's function
//!
//! ```text
//! g(x, y) = e^{ik|x-y|} / (4π |x-y|)
//! ```
//!
//! its gradient, and the 3×3 dyadic
//!
//! ```text
//! D(x, y) = Hess_x g + k² g I
//! ```
//!
//! which propagates curl moments between sites: `D·q = ∇×[∇g × q]` away
//! from the source. All three admit closed forms in r = |x−y| and the unit
//! separation r̂; the closed forms are the production path, finite
//! differences exist only as test oracles.

use crate::geom::{CMat3, CVec3, RVec3};
use num_complex::Complex64;
use thiserror::Error;

/// Points closer than this fraction of the configured length scale are
/// treated as coincident, guarding the 1/r³ singularity of the dyadic.
pub const COINCIDENCE_FRACTION: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreensError {
    #[error("coincident source and target: |x - y| = {r:.3e} is below {threshold:.3e}")]
    Coincident { r: f64, threshold: f64 },
    #[error("wavenumber must satisfy Im k >= 0, got {0}")]
    GrowingWavenumber(Complex64),
    #[error("k = 0 is reserved for the static kernel; use Wavenumber::static_limit()")]
    ZeroWavenumber,
}

/// Background wavenumber k with Im k ≥ 0 so that outgoing waves decay.
///
/// A complex k supports lossy hosts (σ₀ > 0). The exact value k = 0 is a
/// test-support static mode reachable only through [`Wavenumber::static_limit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavenumber(Complex64);

impl Wavenumber {
    pub fn new(k: Complex64) -> Result<Self, GreensError> {
        if k.im < 0.0 {
            return Err(GreensError::GrowingWavenumber(k));
        }
        if k == Complex64::new(0.0, 0.0) {
            return Err(GreensError::ZeroWavenumber);
        }
        Ok(Self(k))
    }

    pub fn real(k: f64) -> Result<Self, GreensError> {
        Self::new(Complex64::new(k, 0.0))
    }

    /// Static (k = 0) kernel: Coulomb limit used by unit tests.
    pub fn static_limit() -> Self {
        Self(Complex64::new(0.0, 0.0))
    }

    pub fn value(self) -> Complex64 {
        self.0
    }
}

fn separation(x: &RVec3, y: &RVec3) -> (RVec3, f64) {
    let d = x - y;
    (d, d.norm())
}

fn check_separation(r: f64, threshold: f64) -> Result<(), GreensError> {
    if !(r > threshold) {
        return Err(GreensError::Coincident { r, threshold });
    }
    Ok(())
}

/// e^{ikr} / (4πr) with the default unit length scale.
pub fn scalar_green(x: &RVec3, y: &RVec3, k: Wavenumber) -> Result<Complex64, GreensError> {
    Kernel::new(k).scalar(x, y)
}

/// ∇ₓ g = g · (ik − 1/r) · r̂.
pub fn grad_green(x: &RVec3, y: &RVec3, k: Wavenumber) -> Result<CVec3, GreensError> {
    Kernel::new(k).gradient(x, y)
}

/// D = Hess_x g + k² g I
///   = g · [ (−k² − 3ik/r + 3/r²) r̂r̂ᵀ + (k² + ik/r − 1/r²) I ].
pub fn dyadic_green(x: &RVec3, y: &RVec3, k: Wavenumber) -> Result<CMat3, GreensError> {
    Kernel::new(k).dyadic(x, y)
}

/// Kernel evaluator carrying the wavenumber and the coincidence threshold.
///
/// Solvers construct it with their domain diameter so that the 1/r³
/// singularity guard scales with the geometry.
#[derive(Debug, Clone, Copy)]
pub struct Kernel {
    k: Wavenumber,
    r_min: f64,
}

impl Kernel {
    /// Kernel with the unit length scale (r_min = 1e−12).
    pub fn new(k: Wavenumber) -> Self {
        Self {
            k,
            r_min: COINCIDENCE_FRACTION,
        }
    }

    /// Kernel whose coincidence guard is 1e−12 × `length_scale`
    /// (typically the domain diameter).
    pub fn with_length_scale(k: Wavenumber, length_scale: f64) -> Self {
        Self {
            k,
            r_min: COINCIDENCE_FRACTION * length_scale.max(f64::MIN_POSITIVE),
        }
    }

    pub fn wavenumber(&self) -> Wavenumber {
        self.k
    }

    pub fn scalar(&self, x: &RVec3, y: &RVec3) -> Result<Complex64, GreensError> {
        let (_, r) = separation(x, y);
        check_separation(r, self.r_min)?;
        Ok(green_of_r(self.k.value(), r))
    }

    pub fn gradient(&self, x: &RVec3, y: &RVec3) -> Result<CVec3, GreensError> {
        let (d, r) = separation(x, y);
        check_separation(r, self.r_min)?;
        let k = self.k.value();
        let g = green_of_r(k, r);
        let radial = g * (Complex64::i() * k - Complex64::from(1.0 / r)) / r;
        Ok(CVec3::new(radial * d.x, radial * d.y, radial * d.z))
    }

    pub fn dyadic(&self, x: &RVec3, y: &RVec3) -> Result<CMat3, GreensError> {
        let (d, r) = separation(x, y);
        check_separation(r, self.r_min)?;
        Ok(dyadic_of(self.k.value(), &d, r))
    }

    /// D(x, y) applied to q, i.e. ∇ₓ×[∇ₓg(x,y) × q], without forming the
    /// matrix. This is the hot path of the matrix-free matvec.
    pub fn dyadic_apply(&self, x: &RVec3, y: &RVec3, q: &CVec3) -> Result<CVec3, GreensError> {
        let (d, r) = separation(x, y);
        check_separation(r, self.r_min)?;
        let (radial, diag) = dyadic_coefficients(self.k.value(), r);
        let rr = 1.0 / r;
        let rhat = RVec3::new(d.x * rr, d.y * rr, d.z * rr);
        let proj = q.x * rhat.x + q.y * rhat.y + q.z * rhat.z;
        let along = radial * proj;
        Ok(CVec3::new(
            along * rhat.x + diag * q.x,
            along * rhat.y + diag * q.y,
            along * rhat.z + diag * q.z,
        ))
    }
}

fn green_of_r(k: Complex64, r: f64) -> Complex64 {
    (Complex64::i() * k * r).exp() / (4.0 * std::f64::consts::PI * r)
}

/// Coefficients (A, B) of D = A·r̂r̂ᵀ + B·I, both including the factor g.
fn dyadic_coefficients(k: Complex64, r: f64) -> (Complex64, Complex64) {
    let g = green_of_r(k, r);
    let k2 = k * k;
    let ik_r = Complex64::i() * k / r;
    let inv_r2 = Complex64::from(1.0 / (r * r));
    let radial = g * (-k2 - 3.0 * ik_r + 3.0 * inv_r2);
    let diag = g * (k2 + ik_r - inv_r2);
    (radial, diag)
}

fn dyadic_of(k: Complex64, d: &RVec3, r: f64) -> CMat3 {
    let (radial, diag) = dyadic_coefficients(k, r);
    let rhat = d / r;
    let mut m = CMat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let mut v = radial * (rhat[i] * rhat[j]);
            if i == j {
                v += diag;
            }
            m[(i, j)] = v;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::cross_c;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // Independent central-difference oracles; deliberately not the shared
    // fd helpers so the closed forms are checked against a separate path.
    fn fd_grad(x: &RVec3, y: &RVec3, k: Wavenumber, h: f64) -> CVec3 {
        let mut out = CVec3::zeros();
        for i in 0..3 {
            let mut xp = *x;
            let mut xm = *x;
            xp[i] += h;
            xm[i] -= h;
            out[i] = (scalar_green(&xp, y, k).unwrap() - scalar_green(&xm, y, k).unwrap())
                / (2.0 * h);
        }
        out
    }

    fn fd_hessian(x: &RVec3, y: &RVec3, k: Wavenumber, h: f64) -> CMat3 {
        let g0 = scalar_green(x, y, k).unwrap();
        let mut m = CMat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    let mut xp = *x;
                    let mut xm = *x;
                    xp[i] += h;
                    xm[i] -= h;
                    m[(i, j)] = (scalar_green(&xp, y, k).unwrap() - 2.0 * g0
                        + scalar_green(&xm, y, k).unwrap())
                        / (h * h);
                } else {
                    let mut xpp = *x;
                    let mut xpm = *x;
                    let mut xmp = *x;
                    let mut xmm = *x;
                    xpp[i] += h;
                    xpp[j] += h;
                    xpm[i] += h;
                    xpm[j] -= h;
                    xmp[i] -= h;
                    xmp[j] += h;
                    xmm[i] -= h;
                    xmm[j] -= h;
                    m[(i, j)] = (scalar_green(&xpp, y, k).unwrap()
                        - scalar_green(&xpm, y, k).unwrap()
                        - scalar_green(&xmp, y, k).unwrap()
                        + scalar_green(&xmm, y, k).unwrap())
                        / (4.0 * h * h);
                }
            }
        }
        m
    }

    fn sample_pair(seed: u64) -> (RVec3, RVec3) {
        // Deterministic point pairs with separation bounded away from zero.
        let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
        let mut next = || {
            s ^= s >> 30;
            s = s.wrapping_mul(0xBF58_476D_1CE4_E5B9);
            s ^= s >> 27;
            s = s.wrapping_mul(0x94D0_49BB_1331_11EB);
            s ^= s >> 31;
            (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        loop {
            let x = RVec3::new(next(), next(), next());
            let y = RVec3::new(next(), next(), next());
            if (x - y).norm() > 0.2 {
                return (x, y);
            }
        }
    }

    #[test]
    fn static_coulomb_limit() {
        let g = scalar_green(
            &RVec3::new(0.25, 0.0, 0.0),
            &RVec3::zeros(),
            Wavenumber::static_limit(),
        )
        .unwrap();
        assert_relative_eq!(g.re, 1.0 / PI, max_relative = 1e-14);
        assert_eq!(g.im, 0.0);
    }

    #[test]
    fn unit_distance_unit_wavenumber() {
        let k = Wavenumber::real(1.0).unwrap();
        let g = scalar_green(&RVec3::new(1.0, 0.0, 0.0), &RVec3::zeros(), k).unwrap();
        let expected = c(1.0_f64.cos(), 1.0_f64.sin()) / (4.0 * PI);
        assert_relative_eq!(g.re, expected.re, max_relative = 1e-12);
        assert_relative_eq!(g.im, expected.im, max_relative = 1e-12);
        // Frozen high-precision expansion of (cos 1 + i sin 1)/(4π).
        assert_relative_eq!(g.re, 0.04299589137143181, max_relative = 1e-12);
        assert_relative_eq!(g.im, 0.06696213335029094, max_relative = 1e-12);
    }

    #[test]
    fn static_gradient() {
        let grad = grad_green(
            &RVec3::new(1.0, 0.0, 0.0),
            &RVec3::zeros(),
            Wavenumber::static_limit(),
        )
        .unwrap();
        assert_relative_eq!(grad.x.re, -1.0 / (4.0 * PI), max_relative = 1e-14);
        assert_relative_eq!(grad.y.norm(), 0.0, epsilon = 1e-16);
        assert_relative_eq!(grad.z.norm(), 0.0, epsilon = 1e-16);
    }

    #[test]
    fn static_dipole_kernel() {
        let d = dyadic_green(
            &RVec3::new(1.0, 0.0, 0.0),
            &RVec3::zeros(),
            Wavenumber::static_limit(),
        )
        .unwrap();
        let f = 1.0 / (4.0 * PI);
        assert_relative_eq!(d[(0, 0)].re, 2.0 * f, max_relative = 1e-13);
        assert_relative_eq!(d[(1, 1)].re, -f, max_relative = 1e-13);
        assert_relative_eq!(d[(2, 2)].re, -f, max_relative = 1e-13);
        assert_relative_eq!(d[(0, 1)].norm(), 0.0, epsilon = 1e-16);
    }

    #[test]
    fn coincident_points_rejected() {
        let x = RVec3::new(0.3, -0.1, 0.2);
        let k = Wavenumber::real(2.0).unwrap();
        assert!(matches!(
            scalar_green(&x, &x, k),
            Err(GreensError::Coincident { .. })
        ));
        assert!(grad_green(&x, &x, k).is_err());
        assert!(dyadic_green(&x, &x, k).is_err());
    }

    #[test]
    fn wavenumber_guards() {
        assert!(Wavenumber::new(c(1.0, -0.1)).is_err());
        assert!(Wavenumber::new(c(0.0, 0.0)).is_err());
        assert!(Wavenumber::new(c(2.0, 0.5)).is_ok());
        assert_eq!(Wavenumber::static_limit().value(), c(0.0, 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let k = Wavenumber::new(c(1.7, 0.2)).unwrap();
        for seed in 0..20 {
            let (x, y) = sample_pair(seed);
            let r = (x - y).norm();
            let exact = grad_green(&x, &y, k).unwrap();
            let approx = fd_grad(&x, &y, k, 1e-5 * r);
            for i in 0..3 {
                assert_relative_eq!(exact[i].re, approx[i].re, max_relative = 1e-6);
                assert_relative_eq!(exact[i].im, approx[i].im, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn dyadic_matches_finite_difference_hessian() {
        let k = Wavenumber::real(2.3).unwrap();
        for seed in 0..20 {
            let (x, y) = sample_pair(seed);
            let r = (x - y).norm();
            let exact = dyadic_green(&x, &y, k).unwrap();
            let hess = fd_hessian(&x, &y, k, 1e-4 * r);
            let g = scalar_green(&x, &y, k).unwrap();
            let k2g = k.value() * k.value() * g;
            let scale = exact.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for i in 0..3 {
                for j in 0..3 {
                    let mut expected = hess[(i, j)];
                    if i == j {
                        expected += k2g;
                    }
                    assert!(
                        (exact[(i, j)] - expected).norm() <= 1e-5 * scale,
                        "entry ({i},{j}) mismatch: {} vs {}",
                        exact[(i, j)],
                        expected
                    );
                }
            }
        }
    }

    #[test]
    fn helmholtz_residual_small() {
        // (∇² + k²) g = 0 away from the source via the 7-point Laplacian.
        let k = Wavenumber::real(1.9).unwrap();
        for seed in 0..20 {
            let (x, y) = sample_pair(seed);
            let r = (x - y).norm();
            let h = 1e-4 * r;
            let g0 = scalar_green(&x, &y, k).unwrap();
            let mut lap = -6.0 * g0;
            for i in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                lap += scalar_green(&xp, &y, k).unwrap() + scalar_green(&xm, &y, k).unwrap();
            }
            lap /= h * h;
            let residual = (lap + k.value() * k.value() * g0).norm();
            assert!(
                residual <= 1e-5 * (k.value() * k.value() * g0).norm(),
                "relative Helmholtz residual too large: {residual:e}"
            );
        }
    }

    #[test]
    fn dyadic_apply_agrees_with_matrix() {
        let k = Wavenumber::new(c(1.1, 0.4)).unwrap();
        let kernel = Kernel::new(k);
        let (x, y) = sample_pair(7);
        let q = CVec3::new(c(0.3, -1.0), c(2.0, 0.2), c(-0.7, 0.9));
        let via_matrix = dyadic_green(&x, &y, k).unwrap() * q;
        let direct = kernel.dyadic_apply(&x, &y, &q).unwrap();
        for i in 0..3 {
            assert_relative_eq!(via_matrix[i].re, direct[i].re, max_relative = 1e-13);
            assert_relative_eq!(via_matrix[i].im, direct[i].im, max_relative = 1e-13);
        }
    }

    #[test]
    fn dyadic_reproduces_curl_of_cross_product() {
        // D·q must equal ∇×[∇g × q] computed by finite differences.
        let k = Wavenumber::real(1.3).unwrap();
        let (x, y) = sample_pair(3);
        let q = CVec3::new(c(1.0, 0.0), c(0.0, -0.5), c(0.25, 0.75));
        let h = 1e-5;
        let field = |p: &RVec3| cross_c(&grad_green(p, &y, k).unwrap(), &q);
        let mut curl = CVec3::zeros();
        for i in 0..3 {
            let (j, l) = ((i + 1) % 3, (i + 2) % 3);
            let mut pj = *(&x);
            let mut mj = x;
            pj[j] += h;
            mj[j] -= h;
            let mut pl = x;
            let mut ml = x;
            pl[l] += h;
            ml[l] -= h;
            curl[i] = (field(&pj)[l] - field(&mj)[l]) / (2.0 * h)
                - (field(&pl)[j] - field(&ml)[j]) / (2.0 * h);
        }
        let exact = dyadic_green(&x, &y, k).unwrap() * q;
        for i in 0..3 {
            assert_relative_eq!(exact[i].re, curl[i].re, max_relative = 1e-5);
            assert_relative_eq!(exact[i].im, curl[i].im, max_relative = 1e-5);
        }
    }

    #[test]
    fn far_field_decay() {
        let k = Wavenumber::real(3.0).unwrap();
        let y = RVec3::zeros();
        let q = CVec3::new(c(1.0, 0.0), c(0.5, 0.5), c(0.0, -1.0));
        let dir = RVec3::new(0.6, -0.64, 0.48).normalize();
        for &r in &[50.0, 100.0, 200.0] {
            let near = (dyadic_green(&(dir * r), &y, k).unwrap() * q).norm();
            let far = (dyadic_green(&(dir * 2.0 * r), &y, k).unwrap() * q).norm();
            let ratio = far / near;
            assert!(
                (ratio - 0.5).abs() < 0.02,
                "1/r decay violated at r = {r}: ratio {ratio}"
            );
            let g = scalar_green(&(dir * r), &y, k).unwrap();
            assert_relative_eq!(g.norm(), 1.0 / (4.0 * PI * r), max_relative = 1e-12);
        }
    }

    #[test]
    fn scattered_dipole_field_divergence_free() {
        // ∇·(D(x,y)·q) ~ 0 for constant q, checked by central differences.
        let k = Wavenumber::real(1.4).unwrap();
        let y = RVec3::zeros();
        let q = CVec3::new(c(0.8, 0.1), c(-0.3, 0.6), c(0.2, -0.2));
        let x = RVec3::new(0.9, 0.5, -0.7);
        let h = 1e-5;
        let mut div = Complex64::default();
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fp = dyadic_green(&xp, &y, k).unwrap() * q;
            let fm = dyadic_green(&xm, &y, k).unwrap() * q;
            div += (fp[i] - fm[i]) / (2.0 * h);
        }
        let scale = (dyadic_green(&x, &y, k).unwrap() * q).norm() / (x - y).norm();
        assert!(
            div.norm() <= 1e-5 * scale.max(1.0),
            "divergence too large: {:e}",
            div.norm()
        );
    }

    proptest! {
        #[test]
        fn kernel_symmetry(sx in -1.0..1.0f64, sy in -1.0..1.0f64, sz in -1.0..1.0f64,
                           tx in 1.5..3.0f64, ty in -3.0..-1.5f64, tz in -1.0..1.0f64,
                           kre in 0.2..4.0f64, kim in 0.0..1.0f64) {
            let x = RVec3::new(sx, sy, sz);
            let y = RVec3::new(tx, ty, tz);
            let k = Wavenumber::new(c(kre, kim)).unwrap();

            // g symmetric in its arguments.
            let gxy = scalar_green(&x, &y, k).unwrap();
            let gyx = scalar_green(&y, &x, k).unwrap();
            prop_assert!((gxy - gyx).norm() <= 1e-14 * gxy.norm());

            // Gradient antisymmetric under argument swap.
            let gx = grad_green(&x, &y, k).unwrap();
            let gy_swapped = grad_green(&y, &x, k).unwrap();
            for i in 0..3 {
                prop_assert!((gx[i] + gy_swapped[i]).norm() <= 1e-13 * gx.norm().max(1e-300));
            }

            // D symmetric as a matrix and under argument swap; trace identity.
            let d = dyadic_green(&x, &y, k).unwrap();
            let d_swapped = dyadic_green(&y, &x, k).unwrap();
            let scale = d.iter().map(|v| v.norm()).fold(0.0, f64::max);
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((d[(i, j)] - d[(j, i)]).norm() <= 1e-13 * scale);
                    prop_assert!((d[(i, j)] - d_swapped[(i, j)]).norm() <= 1e-13 * scale);
                }
            }
            let trace = d[(0, 0)] + d[(1, 1)] + d[(2, 2)];
            let expected = 2.0 * k.value() * k.value() * gxy;
            prop_assert!((trace - expected).norm() <= 1e-10 * expected.norm().max(1e-300));
        }
    }
}
