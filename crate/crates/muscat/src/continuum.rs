//! Collocation solver for the limiting medium.
//!
//! As a → 0 the particle sums converge to the integral equation
//!
//! ```text
//! E(x) = E₀(x) − (8π/3) i ω ε₀ ∫_Ω [∇ₓg(x,y), (∇×E)(y)] h(y) N(y) dy.
//! ```
//!
//! Taking the curl and enforcing the result at the midpoints of an n³ tiling
//! of Ω gives the Nyström system
//!
//! ```text
//! W_c + (8π/3) i ω ε₀ Σ_{c'≠c} D(y_c, y_{c'}) W_{c'} w_{c'} = (∇×E₀)(y_c),
//! ```
//!
//! with nodal weights w_c = h(y_c) N(y_c) v. The self-cell is excluded,
//! mirroring the m ≠ j structure of the particle system; with matched
//! weights the two systems coincide entrywise.

use crate::fd;
use crate::fieldexpr::{ProfileError, ScalarFieldProfile};
use crate::fields::IncidentField;
use crate::geom::{cross_c, norm_c, BoxDomain, CVec3, RVec3};
use crate::greens::Kernel;
use crate::linalg::DenseMatrix;
use crate::medium::{EffectiveMedium, MediumError, WaveParameters};
use crate::moments::{MomentSystem, SolveError, SolveOptions, SolverBackend, SolverDiagnostics};
use num_complex::Complex64;
use thiserror::Error;

/// Node count above which the `Auto` backend switches to matrix-free GMRES
/// (the dense factorization stops being worth its cubic cost around here).
pub const AUTO_DIRECT_NODE_LIMIT: usize = 1000;

/// Default finite-difference step for the effective-PDE residual, as a
/// fraction of the domain edge.
pub const DEFAULT_RESIDUAL_STEP: f64 = 1e-3;

/// Steps below this fraction of the edge make the residual meaningless.
const MIN_RESIDUAL_STEP: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum ContinuumError {
    #[error("collocation grid must have at least one cell per axis")]
    EmptyGrid,
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Medium(#[from] MediumError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(
        "residual step underflow near the domain boundary at ({0}, {1}, {2}); diagnostic skipped"
    )]
    StepUnderflow(f64, f64, f64),
}

/// Midpoint collocation grid over Ω with nodal weights h(y_c)·N(y_c)·v.
#[derive(Debug, Clone)]
pub struct CollocationGrid {
    pub domain: BoxDomain,
    pub n: usize,
    pub centers: Vec<RVec3>,
    pub cell: f64,
    pub weights: Vec<Complex64>,
}

/// Tiles Ω into n³ cells and samples the profiles at the centers.
pub fn collocation_grid(
    domain: BoxDomain,
    n: usize,
    density: &ScalarFieldProfile,
    impedance: &ScalarFieldProfile,
) -> Result<CollocationGrid, ContinuumError> {
    if n == 0 {
        return Err(ContinuumError::EmptyGrid);
    }
    let (centers, cell) = domain.cell_centers(n);
    let volume = cell * cell * cell;
    let mut weights = Vec::with_capacity(centers.len());
    for y in &centers {
        let nv = density.evaluate_density(y)?;
        let hv = impedance.evaluate(y).map_err(ProfileError::from)?;
        weights.push(hv * nv * volume);
    }
    Ok(CollocationGrid {
        domain,
        n,
        centers,
        cell,
        weights,
    })
}

/// Assembled collocation system.
pub struct ContinuumSystem {
    grid: CollocationGrid,
    inner: MomentSystem,
}

pub fn assemble_collocation(
    grid: CollocationGrid,
    wave: &WaveParameters,
    incident: &dyn IncidentField,
) -> Result<ContinuumSystem, ContinuumError> {
    let coupling = wave.coupling();
    let strengths: Vec<Complex64> = grid.weights.iter().map(|w| coupling * w).collect();
    let kernel = Kernel::with_length_scale(wave.wavenumber()?, grid.domain.diameter());
    let rhs: Vec<CVec3> = grid.centers.iter().map(|y| incident.curl(y)).collect();
    let inner = MomentSystem {
        points: grid.centers.clone(),
        strengths,
        kernel,
        rhs,
    };
    Ok(ContinuumSystem { grid, inner })
}

impl ContinuumSystem {
    pub fn node_count(&self) -> usize {
        self.inner.sites()
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn grid(&self) -> &CollocationGrid {
        &self.grid
    }

    /// Dense I + C for the system-identity oracle.
    pub fn dense_matrix(&self) -> DenseMatrix {
        self.inner.dense_matrix()
    }

    pub fn solve(self, backend: SolverBackend) -> Result<ContinuumSolution, ContinuumError> {
        let opts = SolveOptions {
            backend,
            auto_direct_sites: AUTO_DIRECT_NODE_LIMIT,
        };
        let (curls, diagnostics) = self.inner.solve(&opts)?;
        Ok(ContinuumSolution {
            grid: self.grid,
            curls,
            diagnostics,
            sources: self.inner,
        })
    }
}

/// Convenience: grid → system → solution in one call.
pub fn solve_limit_curl(
    grid: CollocationGrid,
    wave: &WaveParameters,
    incident: &dyn IncidentField,
    backend: SolverBackend,
) -> Result<ContinuumSolution, ContinuumError> {
    assemble_collocation(grid, wave, incident)?.solve(backend)
}

/// Nodal curl values W_c ≈ (∇×E)(y_c) and the evaluable limit field.
pub struct ContinuumSolution {
    pub grid: CollocationGrid,
    pub curls: Vec<CVec3>,
    pub diagnostics: SolverDiagnostics,
    sources: MomentSystem,
}

impl ContinuumSolution {
    /// Index of the cell owning x, if x lies inside Ω.
    fn owning_cell(&self, x: &RVec3) -> Option<usize> {
        let lo = self.grid.domain.min_corner();
        let n = self.grid.n;
        let mut idx = [0usize; 3];
        for i in 0..3 {
            let t = (x[i] - lo[i]) / self.grid.cell;
            if t < 0.0 || t > n as f64 {
                return None;
            }
            idx[i] = (t.floor() as usize).min(n - 1);
        }
        Some(idx[0] + n * (idx[1] + n * idx[2]))
    }

    /// E(x) = E₀(x) − Σ_c s_c [∇g(x, y_c) × W_c] w_c. For x inside Ω the
    /// owning cell is excluded from the sum (nearest-node exclusion), so
    /// evaluation is defined everywhere, including on nodes.
    pub fn evaluate_field(&self, incident: &dyn IncidentField, x: &RVec3) -> CVec3 {
        incident.field(x) + self.scattered_field(x)
    }

    /// The integral term alone.
    pub fn scattered_field(&self, x: &RVec3) -> CVec3 {
        let skip = self.owning_cell(x);
        self.sources
            .scattered_field(&self.curls, x, skip)
            .expect("self-cell exclusion keeps x away from active sources")
    }

    /// Exact curl of the evaluated field (∇×E₀ plus the dyadic sum), with
    /// the same nearest-node exclusion as `evaluate_field`.
    pub fn evaluate_curl(&self, incident: &dyn IncidentField, x: &RVec3) -> CVec3 {
        let skip = self.owning_cell(x);
        incident.curl(x)
            + self
                .sources
                .curl_of_scattered(&self.curls, x, skip)
                .expect("self-cell exclusion keeps x away from active sources")
    }

    /// Finite-difference residual of the limiting wave equation
    ///
    /// ```text
    /// ‖∇×∇×E − K²E + (8π/3)iωε₀/Ψ · [∇(hN), ∇×E]‖ / ‖K²E‖
    /// ```
    ///
    /// at an interior point. The step shrinks near ∂Ω; if it underflows the
    /// diagnostic is skipped via `StepUnderflow`.
    pub fn effective_pde_residual(
        &self,
        incident: &dyn IncidentField,
        medium: &EffectiveMedium,
        x: &RVec3,
        step: Option<f64>,
    ) -> Result<f64, ContinuumError> {
        let edge = self.grid.domain.edge;
        let lo = self.grid.domain.min_corner();
        let hi = self.grid.domain.max_corner();
        let mut boundary_gap = f64::INFINITY;
        for i in 0..3 {
            boundary_gap = boundary_gap.min((x[i] - lo[i]).min(hi[i] - x[i]));
        }
        let wanted = step.unwrap_or(DEFAULT_RESIDUAL_STEP * edge);
        // The widest stencil offset is √2·h; keep it strictly interior.
        let h = wanted.min(boundary_gap / 3.0);
        if !(h > MIN_RESIDUAL_STEP * edge) {
            return Err(ContinuumError::StepUnderflow(x.x, x.y, x.z));
        }

        let field = |p: &RVec3| self.evaluate_field(incident, p);
        let curl_curl_e = fd::curl_curl(&field, x, h);
        let curl_e = fd::curl(&field, x, h);
        let e = field(x);

        let k2 = medium.refraction_sq(x)?;
        let psi = medium.psi(x)?;
        let mut grad_hn = CVec3::zeros();
        for i in 0..3 {
            let mut xp = *x;
            let mut xm = *x;
            xp[i] += h;
            xm[i] -= h;
            grad_hn[i] = (medium.h_times_n(&xp)? - medium.h_times_n(&xm)?) / (2.0 * h);
        }

        let extra = cross_c(&grad_hn, &curl_e) * (medium.wave().coupling() / psi);
        let residual = curl_curl_e - e * k2 + extra;
        Ok(norm_c(&residual) / norm_c(&(e * k2)).max(f64::MIN_POSITIVE))
    }
}
