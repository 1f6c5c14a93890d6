//! Geometry primitives shared across the solver stack: real/complex
//! 3-vectors and the axis-aligned cubic domain Ω that hosts the particle
//! cloud and the collocation grid.

use nalgebra::Vector3;
use num_complex::Complex64;

/// Real 3-vector (positions, directions).
pub type RVec3 = Vector3<f64>;
/// Complex 3-vector (fields, curl moments, charges).
pub type CVec3 = Vector3<Complex64>;
/// Complex 3×3 matrix (dyadic kernels).
pub type CMat3 = nalgebra::Matrix3<Complex64>;

/// Promote a real vector to a complex one.
pub fn complexify(v: &RVec3) -> CVec3 {
    CVec3::new(v.x.into(), v.y.into(), v.z.into())
}

/// Cross product of two complex 3-vectors.
pub fn cross_c(a: &CVec3, b: &CVec3) -> CVec3 {
    CVec3::new(
        a.y * b.z - a.z * b.y,
        a.z * b.x - a.x * b.z,
        a.x * b.y - a.y * b.x,
    )
}

/// Euclidean norm of a complex 3-vector.
pub fn norm_c(v: &CVec3) -> f64 {
    (v.x.norm_sqr() + v.y.norm_sqr() + v.z.norm_sqr()).sqrt()
}

/// L² norm of a stacked list of complex 3-vectors.
pub fn l2_norm(values: &[CVec3]) -> f64 {
    values
        .iter()
        .map(|v| v.x.norm_sqr() + v.y.norm_sqr() + v.z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Relative L² distance ‖a − b‖ / ‖b‖ between two sampled vector fields.
///
/// Returns 0 when both fields vanish.
pub fn rel_l2_diff(a: &[CVec3], b: &[CVec3]) -> f64 {
    assert_eq!(a.len(), b.len(), "field samples must align");
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(u, v)| {
            let d = u - v;
            d.x.norm_sqr() + d.y.norm_sqr() + d.z.norm_sqr()
        })
        .sum();
    let scale = l2_norm(b);
    if scale == 0.0 {
        return diff.sqrt();
    }
    diff.sqrt() / scale
}

/// Axis-aligned cube Ω given by its center and edge length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    pub center: RVec3,
    pub edge: f64,
}

impl BoxDomain {
    pub fn new(center: RVec3, edge: f64) -> Self {
        assert!(edge > 0.0, "domain edge must be positive");
        Self { center, edge }
    }

    /// Unit cube centered at the origin.
    pub fn unit() -> Self {
        Self::new(RVec3::zeros(), 1.0)
    }

    pub fn min_corner(&self) -> RVec3 {
        self.center - RVec3::repeat(self.edge / 2.0)
    }

    pub fn max_corner(&self) -> RVec3 {
        self.center + RVec3::repeat(self.edge / 2.0)
    }

    /// Space diagonal |max − min|.
    pub fn diameter(&self) -> f64 {
        self.edge * 3.0_f64.sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.edge.powi(3)
    }

    /// Closed-box membership (boundary counts as inside).
    pub fn contains(&self, x: &RVec3) -> bool {
        let lo = self.min_corner();
        let hi = self.max_corner();
        (0..3).all(|i| x[i] >= lo[i] && x[i] <= hi[i])
    }

    /// Half-open membership [lo, hi) per axis; used when tiling Ω into
    /// sub-boxes so each point is counted exactly once.
    pub fn contains_half_open(&self, x: &RVec3) -> bool {
        let lo = self.min_corner();
        let hi = self.max_corner();
        (0..3).all(|i| x[i] >= lo[i] && x[i] < hi[i])
    }

    /// The eight equal sub-cubes obtained by halving every axis.
    pub fn octants(&self) -> [BoxDomain; 8] {
        let quarter = self.edge / 4.0;
        let mut out = [*self; 8];
        for (idx, b) in out.iter_mut().enumerate() {
            let sx = if idx & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if idx & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if idx & 4 == 0 { -1.0 } else { 1.0 };
            *b = BoxDomain {
                center: self.center + RVec3::new(sx, sy, sz) * quarter,
                edge: self.edge / 2.0,
            };
        }
        out
    }

    /// All dyadic sub-boxes at a given halving level (level 0 is Ω itself,
    /// level ℓ holds 8^ℓ boxes of edge `edge / 2^ℓ`).
    pub fn dyadic_level(&self, level: u32) -> Vec<BoxDomain> {
        let mut boxes = vec![*self];
        for _ in 0..level {
            boxes = boxes.iter().flat_map(|b| b.octants()).collect();
        }
        boxes
    }

    /// Center of cell (ix, iy, iz) when Ω is tiled by n³ equal cells.
    pub fn cell_center(&self, n: usize, ix: usize, iy: usize, iz: usize) -> RVec3 {
        let cell = self.edge / n as f64;
        let lo = self.min_corner();
        RVec3::new(
            lo.x + (ix as f64 + 0.5) * cell,
            lo.y + (iy as f64 + 0.5) * cell,
            lo.z + (iz as f64 + 0.5) * cell,
        )
    }

    /// Midpoint-rule cell centers of the n³ tiling, z-major then y then x,
    /// together with the cell edge length.
    pub fn cell_centers(&self, n: usize) -> (Vec<RVec3>, f64) {
        assert!(n > 0, "tiling requires at least one cell per axis");
        let cell = self.edge / n as f64;
        let mut centers = Vec::with_capacity(n * n * n);
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    centers.push(self.cell_center(n, ix, iy, iz));
                }
            }
        }
        (centers, cell)
    }
}
