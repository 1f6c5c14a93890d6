//! Shared curl-moment linear system.
//!
//! Both the particle system and the collocation system have the block form
//!
//! ```text
//! (I + C) W = W₀,    C_{jc} = s_c · D(p_j, p_c)  (c ≠ j, C_{jj} = 0)
//! ```
//!
//! differing only in what the per-site strength s_c is: `(8π/3) i ω ε₀ ζ_m a²`
//! for particles, `(8π/3) i ω ε₀ h(y_c) N(y_c) v` for collocation nodes.
//! Keeping one implementation makes the two systems structurally identical,
//! which the matched-lattice oracle exploits. The scattered field shares the
//! same data: E(x) = E₀(x) − Σ_c s_c [∇g(x, p_c) × W_c].

use crate::geom::{cross_c, CVec3, RVec3};
use crate::greens::{GreensError, Kernel};
use crate::linalg::{
    self, DenseMatrix, GmresConfig, LinAlgError, LinearOperator,
};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

/// Default residual contract of the direct backend.
pub const DIRECT_RESIDUAL_TOL: f64 = 1e-10;
/// Solver refusal threshold on the 1-norm condition estimate.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
    #[error(transparent)]
    Kernel(#[from] GreensError),
    #[error("solution residual {residual:.3e} exceeds the contract {tolerance:.1e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },
}

/// Which linear-system backend to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverBackend {
    /// Direct LU up to `auto_direct_sites`, GMRES above.
    Auto,
    DirectLu,
    Gmres(GmresConfig),
}

#[derive(Debug, Clone)]
pub struct SolverDiagnostics {
    /// "direct-lu" or "gmres".
    pub backend: &'static str,
    /// Relative residual ‖(I+C)W − W₀‖ / ‖W₀‖ recomputed after the solve.
    pub residual: f64,
    /// 1-norm condition estimate (direct backend only).
    pub condition_estimate: Option<f64>,
    /// Iteration count (iterative backend only).
    pub iterations: Option<usize>,
}

pub(crate) struct SolveOptions {
    pub backend: SolverBackend,
    /// Site count at or below which `Auto` picks the direct backend.
    pub auto_direct_sites: usize,
}

/// The assembled system: sites, strengths, kernel, and right-hand side.
#[derive(Debug)]
pub(crate) struct MomentSystem {
    pub points: Vec<RVec3>,
    pub strengths: Vec<Complex64>,
    pub kernel: Kernel,
    pub rhs: Vec<CVec3>,
}

pub(crate) fn flatten(v: &[CVec3]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(3 * v.len());
    for w in v {
        out.extend_from_slice(&[w.x, w.y, w.z]);
    }
    out
}

pub(crate) fn unflatten(v: &[Complex64]) -> Vec<CVec3> {
    v.chunks_exact(3)
        .map(|c| CVec3::new(c[0], c[1], c[2]))
        .collect()
}

impl MomentSystem {
    pub fn sites(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        3 * self.sites()
    }

    /// Materializes I + C as a dense matrix (rows assembled in parallel).
    pub fn dense_matrix(&self) -> DenseMatrix {
        let m = self.sites();
        let n = self.dim();
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        data.par_chunks_mut(3 * n).enumerate().for_each(|(j, rows)| {
            for comp in 0..3 {
                rows[comp * n + 3 * j + comp] = Complex64::from(1.0);
            }
            for c in 0..m {
                if c == j || self.strengths[c] == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let block = self
                    .kernel
                    .dyadic(&self.points[j], &self.points[c])
                    .expect("sites validated pairwise distinct")
                    * self.strengths[c];
                for r in 0..3 {
                    for s in 0..3 {
                        rows[r * n + 3 * c + s] += block[(r, s)];
                    }
                }
            }
        });
        DenseMatrix::from_rows(n, data)
    }

    /// y = (I + C) x without forming the matrix; deterministic row order.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let m = self.sites();
        debug_assert_eq!(x.len(), 3 * m);
        debug_assert_eq!(y.len(), 3 * m);
        let xv: Vec<CVec3> = unflatten(x);
        y.par_chunks_mut(3).enumerate().for_each(|(j, out)| {
            let mut acc = xv[j];
            for c in 0..m {
                if c == j {
                    continue;
                }
                let s = self.strengths[c];
                if s == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let q = xv[c] * s;
                let add = self
                    .kernel
                    .dyadic_apply(&self.points[j], &self.points[c], &q)
                    .expect("sites validated pairwise distinct");
                acc += add;
            }
            out[0] = acc.x;
            out[1] = acc.y;
            out[2] = acc.z;
        });
    }

    /// Relative residual of a candidate solution.
    pub fn residual(&self, w: &[CVec3]) -> f64 {
        let x = flatten(w);
        let mut ax = vec![Complex64::new(0.0, 0.0); x.len()];
        self.apply(&x, &mut ax);
        let rhs = flatten(&self.rhs);
        let num: f64 = ax
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den: f64 = rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    pub fn solve(
        &self,
        opts: &SolveOptions,
    ) -> Result<(Vec<CVec3>, SolverDiagnostics), SolveError> {
        let backend = match opts.backend {
            SolverBackend::Auto => {
                if self.sites() <= opts.auto_direct_sites {
                    SolverBackend::DirectLu
                } else {
                    SolverBackend::Gmres(GmresConfig::default())
                }
            }
            other => other,
        };
        match backend {
            SolverBackend::DirectLu => self.solve_direct(),
            SolverBackend::Gmres(cfg) => self.solve_gmres(&cfg),
            SolverBackend::Auto => unreachable!(),
        }
    }

    fn solve_direct(&self) -> Result<(Vec<CVec3>, SolverDiagnostics), SolveError> {
        let matrix = self.dense_matrix();
        let norm_one = matrix.norm_one();
        let lu = linalg::lu_factor(matrix)?;
        let estimate = lu.inverse_norm_one_estimate() * norm_one;
        if estimate > CONDITION_LIMIT {
            return Err(SolveError::LinAlg(LinAlgError::IllConditioned {
                estimate,
                limit: CONDITION_LIMIT,
            }));
        }
        let x = lu.solve(&flatten(&self.rhs));
        let w = unflatten(&x);
        let residual = self.residual(&w);
        if residual > DIRECT_RESIDUAL_TOL {
            return Err(SolveError::ResidualTooLarge {
                residual,
                tolerance: DIRECT_RESIDUAL_TOL,
            });
        }
        Ok((
            w,
            SolverDiagnostics {
                backend: "direct-lu",
                residual,
                condition_estimate: Some(estimate),
                iterations: None,
            },
        ))
    }

    fn solve_gmres(
        &self,
        cfg: &GmresConfig,
    ) -> Result<(Vec<CVec3>, SolverDiagnostics), SolveError> {
        struct Op<'a>(&'a MomentSystem);
        impl LinearOperator for Op<'_> {
            fn dim(&self) -> usize {
                self.0.dim()
            }
            fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
                self.0.apply(x, y);
            }
        }
        let (x, stats) = linalg::gmres(&Op(self), &flatten(&self.rhs), cfg)?;
        let w = unflatten(&x);
        let residual = self.residual(&w);
        if residual > cfg.tol * 10.0 {
            return Err(SolveError::ResidualTooLarge {
                residual,
                tolerance: cfg.tol * 10.0,
            });
        }
        Ok((
            w,
            SolverDiagnostics {
                backend: "gmres",
                residual,
                condition_estimate: None,
                iterations: Some(stats.iterations),
            },
        ))
    }

    /// −Σ_{c ≠ skip} s_c [∇g(x, p_c) × w_c]: the scattered part of the field
    /// representation shared by both solvers.
    pub fn scattered_field(
        &self,
        w: &[CVec3],
        x: &RVec3,
        skip: Option<usize>,
    ) -> Result<CVec3, GreensError> {
        let mut acc = CVec3::zeros();
        for c in 0..self.sites() {
            if Some(c) == skip {
                continue;
            }
            let s = self.strengths[c];
            if s == Complex64::new(0.0, 0.0) {
                continue;
            }
            let grad = self.kernel.gradient(x, &self.points[c])?;
            acc -= cross_c(&grad, &w[c]) * s;
        }
        Ok(acc)
    }

    /// Exact curl of the scattered part, −Σ_{c ≠ skip} s_c D(x, p_c)·w_c,
    /// using ∇×[∇g × q] = D·q.
    pub fn curl_of_scattered(
        &self,
        w: &[CVec3],
        x: &RVec3,
        skip: Option<usize>,
    ) -> Result<CVec3, GreensError> {
        let mut acc = CVec3::zeros();
        for c in 0..self.sites() {
            if Some(c) == skip {
                continue;
            }
            let s = self.strengths[c];
            if s == Complex64::new(0.0, 0.0) {
                continue;
            }
            acc -= self.kernel.dyadic_apply(x, &self.points[c], &(w[c] * s))?;
        }
        Ok(acc)
    }
}
