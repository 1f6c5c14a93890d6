//! Particle-cloud solver.
//!
//! Assembles and solves the 3M×3M system for the curl moments
//! P_m = (∇×E)(x_m),
//!
//! ```text
//! P_j + Σ_{m≠j} (8π/3) i ω ε₀ ζ_m a² D(x_j, x_m) P_m = (∇×E₀)(x_j),
//! ```
//!
//! derives the moment charges Q_m = −(8π/3) i ω ε₀ ζ_m a² P_m, and evaluates
//! the scattered field E(x) = E₀(x) + Σ_m [∇g(x, x_m) × Q_m] outside the
//! per-particle exclusion radius. Note ζ_m a² = h(x_m) a^{2−κ}.

use crate::fields::IncidentField;
use crate::geom::{CVec3, RVec3};
use crate::greens::Kernel;
use crate::linalg::DenseMatrix;
use crate::medium::{MediumError, WaveParameters};
use crate::moments::{MomentSystem, SolveError, SolveOptions, SolverBackend, SolverDiagnostics};
use crate::placement::ParticleCloud;
use num_complex::Complex64;
use thiserror::Error;

/// Field evaluation is refused within this multiple of the particle radius:
/// the point-moment representation is invalid on and near a particle.
pub const EXCLUSION_FACTOR: f64 = 3.0;

/// Site count above which the `Auto` backend switches from dense LU to
/// matrix-free GMRES.
pub const AUTO_DIRECT_PARTICLE_LIMIT: usize = 2000;

#[derive(Debug, Error)]
pub enum DiscreteError {
    #[error("cloud is empty: the system needs at least one particle")]
    EmptyCloud,
    #[error("particles {0} and {1} coincide (separation below 1e-12 of the domain diameter)")]
    CoincidentParticles(usize, usize),
    #[error(transparent)]
    Medium(#[from] MediumError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(
        "evaluation point is {distance:.3e} from particle {index}, inside the exclusion radius {radius:.3e}"
    )]
    InsideExclusion {
        index: usize,
        distance: f64,
        radius: f64,
    },
}

/// Assembled particle system, ready to materialize or solve.
#[derive(Debug)]
pub struct DiscreteSystem {
    inner: MomentSystem,
    radius: f64,
}

/// Builds the linear system from a cloud, wave parameters, and an incident
/// field. Rejects empty clouds and coincident particle pairs.
pub fn assemble_system(
    cloud: &ParticleCloud,
    wave: &WaveParameters,
    incident: &dyn IncidentField,
) -> Result<DiscreteSystem, DiscreteError> {
    if cloud.is_empty() {
        return Err(DiscreteError::EmptyCloud);
    }
    let diameter = cloud.domain.diameter();
    let tol = 1e-12 * diameter;
    let m = cloud.len();
    for i in 0..m {
        for j in (i + 1)..m {
            if (cloud.particles[i].position - cloud.particles[j].position).norm() <= tol {
                return Err(DiscreteError::CoincidentParticles(i, j));
            }
        }
    }

    let coupling = wave.coupling();
    let points: Vec<RVec3> = cloud.particles.iter().map(|p| p.position).collect();
    let strengths: Vec<Complex64> = (0..m).map(|i| coupling * cloud.strength(i)).collect();
    let kernel = Kernel::with_length_scale(wave.wavenumber()?, diameter);
    let rhs: Vec<CVec3> = points.iter().map(|x| incident.curl(x)).collect();

    Ok(DiscreteSystem {
        inner: MomentSystem {
            points,
            strengths,
            kernel,
            rhs,
        },
        radius: cloud.radius,
    })
}

impl DiscreteSystem {
    pub fn particle_count(&self) -> usize {
        self.inner.sites()
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Right-hand side P₀ (stacked incident curls).
    pub fn rhs(&self) -> &[CVec3] {
        &self.inner.rhs
    }

    /// Dense I + C, mainly for small-system oracles and diagnostics.
    pub fn dense_matrix(&self) -> DenseMatrix {
        self.inner.dense_matrix()
    }

    pub fn solve(&self, backend: SolverBackend) -> Result<DiscreteSolution, DiscreteError> {
        let opts = SolveOptions {
            backend,
            auto_direct_sites: AUTO_DIRECT_PARTICLE_LIMIT,
        };
        let (moments, diagnostics) = self.inner.solve(&opts)?;
        let charges: Vec<CVec3> = moments
            .iter()
            .zip(&self.inner.strengths)
            .map(|(p, s)| -(p * *s))
            .collect();
        Ok(DiscreteSolution {
            moments,
            charges,
            diagnostics,
            sources: MomentSystem {
                points: self.inner.points.clone(),
                strengths: self.inner.strengths.clone(),
                kernel: self.inner.kernel,
                rhs: Vec::new(),
            },
            exclusion_radius: EXCLUSION_FACTOR * self.radius,
        })
    }

    /// Convenience: assemble-and-solve with the automatic backend.
    pub fn solve_auto(&self) -> Result<DiscreteSolution, DiscreteError> {
        self.solve(SolverBackend::Auto)
    }
}

/// Solved curl moments P_m, charges Q_m, and an evaluable scattered field.
#[derive(Debug)]
pub struct DiscreteSolution {
    pub moments: Vec<CVec3>,
    pub charges: Vec<CVec3>,
    pub diagnostics: SolverDiagnostics,
    sources: MomentSystem,
    exclusion_radius: f64,
}

impl DiscreteSolution {
    pub fn particle_count(&self) -> usize {
        self.sources.points.len()
    }

    pub fn positions(&self) -> &[RVec3] {
        &self.sources.points
    }

    pub fn exclusion_radius(&self) -> f64 {
        self.exclusion_radius
    }

    fn check_exclusion(&self, x: &RVec3) -> Result<(), DiscreteError> {
        for (index, p) in self.sources.points.iter().enumerate() {
            let distance = (x - p).norm();
            if distance < self.exclusion_radius {
                return Err(DiscreteError::InsideExclusion {
                    index,
                    distance,
                    radius: self.exclusion_radius,
                });
            }
        }
        Ok(())
    }

    /// E(x) = E₀(x) + Σ_m [∇g(x, x_m) × Q_m]; errors inside any exclusion
    /// radius.
    pub fn evaluate_field(
        &self,
        incident: &dyn IncidentField,
        x: &RVec3,
    ) -> Result<CVec3, DiscreteError> {
        Ok(incident.field(x) + self.scattered_field(x)?)
    }

    /// The scattered part alone, Σ_m [∇g × Q_m] = −Σ_m s_m [∇g × P_m].
    pub fn scattered_field(&self, x: &RVec3) -> Result<CVec3, DiscreteError> {
        self.check_exclusion(x)?;
        Ok(self
            .sources
            .scattered_field(&self.moments, x, None)
            .expect("exclusion radius keeps x away from all sources"))
    }
}

/// Ratio of the dropped near-field correction bound to the kept dipole-term
/// bound for one pair at separation d:
///
/// ```text
/// a·max(1/d³, k²/d) / max(1/d², k/d)
/// ```
///
/// (The common a^{2−κ} factor cancels.) The ratio is O(max{a/d, ka}) and
/// shrinks as a → 0 at fixed d, which justifies keeping only the point
/// moments.
pub fn neglected_term_ratio(radius: f64, spacing: f64, k_mag: f64) -> f64 {
    let dropped = radius * (1.0 / spacing.powi(3)).max(k_mag * k_mag / spacing);
    let kept = (1.0 / (spacing * spacing)).max(k_mag / spacing);
    dropped / kept
}
