//! Particle cloud generation.
//!
//! Clouds realize the count law: every subdomain Δ ⊂ Ω receives
//! `a^{-(2-κ)} ∫_Δ N(x) dx` particles (up to integer rounding), and each
//! particle at x_m carries the impedance ζ_m = h(x_m)/a^κ.
//!
//! Ω is tiled by a cubic grid whose cell size follows the spacing law
//! d(a) = a^{(2−κ)/3} / max(N)^{1/3}, which makes the per-cell expected
//! count at most one and satisfies a/d → 0 and d → 0 as a → 0. Integer
//! particle budgets are then apportioned down an octree by largest-remainder
//! rounding, so the total count is exactly `round(a^{-(2-κ)} ∫ N)` and every
//! dyadic sub-box stays within O(1) of its expected count. All randomness
//! (cell jitter in `stratified` mode) is hash-derived from the seed and the
//! cell index, so clouds are bit-reproducible.

use crate::fieldexpr::{ProfileError, ScalarFieldProfile, SUPPORT_TOL};
use crate::geom::{BoxDomain, RVec3};
use num_complex::Complex64;
use thiserror::Error;

/// Default refusal threshold for the total particle count.
pub const DEFAULT_CAP: usize = 20_000;

/// Resolution of the probe grid estimating max N over Ω.
const PROBE_N: usize = 32;

/// Hard bound on cells per axis; beyond this the density is too peaked for
/// the lattice to resolve at the requested radius.
const MAX_CELLS_PER_AXIS: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlacementError {
    #[error("particle radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("kappa must lie strictly inside (0, 1), got {0}")]
    InvalidKappa(f64),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(
        "expected particle count {expected:.1} exceeds the cap {cap}; \
         increase the cap or use a radius of at least {radius_needed:.6e}"
    )]
    CapExceeded {
        expected: f64,
        cap: usize,
        radius_needed: f64,
    },
    #[error(
        "radius a = {radius} is not small relative to the spacing d = {spacing:.6e}; \
         a/d must stay below 1"
    )]
    RadiusTooLarge { radius: f64, spacing: f64 },
    #[error("density profile too peaked: lattice would need more than {0} cells per axis")]
    DensityTooPeaked(usize),
    #[error("coincident particles at indices {0} and {1}")]
    CoincidentParticles(usize, usize),
}

/// Lattice mode places particles at cell centers; stratified mode jitters
/// each particle inside the central half of its cell, breaking lattice
/// artifacts while keeping the guaranteed minimum spacing d = cell/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementMode {
    Lattice,
    Stratified,
}

impl PlacementMode {
    pub fn name(self) -> &'static str {
        match self {
            PlacementMode::Lattice => "lattice",
            PlacementMode::Stratified => "stratified",
        }
    }
}

/// Generation parameters for one cloud.
#[derive(Debug, Clone, Copy)]
pub struct CloudParams {
    /// Particle radius a.
    pub radius: f64,
    /// Count/impedance exponent κ ∈ (0, 1).
    pub kappa: f64,
    pub mode: PlacementMode,
    pub seed: u64,
    /// Refuse generation when the expected count exceeds this.
    pub cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub position: RVec3,
    /// Boundary impedance ζ_m = h(x_m)/a^κ (zero until impedances are
    /// assigned).
    pub zeta: Complex64,
}

/// An immutable particle cloud with its generation metadata.
#[derive(Debug, Clone)]
pub struct ParticleCloud {
    pub radius: f64,
    pub kappa: f64,
    /// Guaranteed minimum pairwise distance d.
    pub spacing: f64,
    pub domain: BoxDomain,
    pub particles: Vec<Particle>,
    /// Indices where Re h(x_m) < 0 was observed during impedance assignment.
    pub non_passive: Vec<usize>,
}

impl ParticleCloud {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// ζ_m · a², the per-particle strength entering the linear system.
    pub fn strength(&self, m: usize) -> Complex64 {
        self.particles[m].zeta * (self.radius * self.radius)
    }

    /// Builds a cloud from explicit positions and impedances (used by tests
    /// and matched-lattice constructions); spacing is the actual minimum
    /// pairwise distance.
    pub fn from_parts(
        radius: f64,
        kappa: f64,
        domain: BoxDomain,
        positions: Vec<RVec3>,
        zetas: Vec<Complex64>,
    ) -> Self {
        assert_eq!(positions.len(), zetas.len());
        let mut spacing = f64::INFINITY;
        for i in 0..positions.len() {
            for j in (i + 1)..positions.len() {
                spacing = spacing.min((positions[i] - positions[j]).norm());
            }
        }
        if !spacing.is_finite() {
            spacing = domain.edge;
        }
        let particles = positions
            .into_iter()
            .zip(zetas)
            .map(|(position, zeta)| Particle { position, zeta })
            .collect();
        Self {
            radius,
            kappa,
            spacing,
            domain,
            particles,
            non_passive: Vec::new(),
        }
    }
}

struct CellGrid {
    n: usize,
    cell: f64,
    /// Expected particle count per cell, row-major ix + n*(iy + n*iz).
    weights: Vec<f64>,
}

impl CellGrid {
    fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.n * (iy + self.n * iz)
    }
}

/// Generates a cloud whose counts follow `a^{-(2-κ)} ∫ N` in every dyadic
/// sub-box of Ω. Impedances start at zero; see [`assign_impedances`].
pub fn generate_cloud(
    density: &ScalarFieldProfile,
    domain: BoxDomain,
    params: &CloudParams,
) -> Result<ParticleCloud, PlacementError> {
    let a = params.radius;
    if !(a > 0.0) || !a.is_finite() {
        return Err(PlacementError::InvalidRadius(a));
    }
    if !(params.kappa > 0.0 && params.kappa < 1.0) {
        return Err(PlacementError::InvalidKappa(params.kappa));
    }
    let count_scale = a.powf(2.0 - params.kappa); // a^{2-κ}

    // Probe the density maximum to fix the spacing law.
    let mut n_max: f64 = 0.0;
    {
        let (centers, _) = domain.cell_centers(PROBE_N);
        for p in &centers {
            n_max = n_max.max(density.evaluate_density(p)?);
        }
    }
    if n_max <= SUPPORT_TOL {
        // Empty medium: no particles anywhere.
        return Ok(ParticleCloud {
            radius: a,
            kappa: params.kappa,
            spacing: domain.edge,
            domain,
            particles: Vec::new(),
            non_passive: Vec::new(),
        });
    }

    // Spacing law d(a) = a^{(2-κ)/3} / N_max^{1/3}: on a uniform lattice this
    // is exactly the cell size implied by the count law.
    let ideal_cell = count_scale.cbrt() / n_max.cbrt();
    let mut n = ((domain.edge / ideal_cell).ceil() as usize).max(1);

    // Build per-cell expected counts; refine if any cell expects more than
    // one particle (possible when the probe missed a sharper peak).
    let grid = loop {
        if n > MAX_CELLS_PER_AXIS {
            return Err(PlacementError::DensityTooPeaked(MAX_CELLS_PER_AXIS));
        }
        let cell = domain.edge / n as f64;
        let volume = cell * cell * cell;
        let mut weights = Vec::with_capacity(n * n * n);
        let mut max_w: f64 = 0.0;
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    let c = domain.cell_center(n, ix, iy, iz);
                    let w = density.evaluate_density(&c)? * volume / count_scale;
                    max_w = max_w.max(w);
                    weights.push(w);
                }
            }
        }
        if max_w <= 1.0 {
            break CellGrid { n, cell, weights };
        }
        n = ((n as f64) * max_w.cbrt()).ceil() as usize + 1;
    };

    let spacing = match params.mode {
        PlacementMode::Lattice => grid.cell,
        PlacementMode::Stratified => grid.cell / 2.0,
    };
    if a >= spacing {
        return Err(PlacementError::RadiusTooLarge { radius: a, spacing });
    }

    let total_weight: f64 = grid.weights.iter().sum();
    let budget = total_weight.round() as usize;
    if budget > params.cap {
        // Invert M(a) = ∫N / a^{2-κ} for the radius that fits the cap.
        let integral = total_weight * count_scale;
        let radius_needed = (integral / params.cap as f64).powf(1.0 / (2.0 - params.kappa));
        return Err(PlacementError::CapExceeded {
            expected: total_weight,
            cap: params.cap,
            radius_needed,
        });
    }

    let mut chosen: Vec<[usize; 3]> = Vec::with_capacity(budget);
    allocate(&grid, [0, 0, 0], [grid.n, grid.n, grid.n], budget, &mut chosen);
    debug_assert_eq!(chosen.len(), budget);
    chosen.sort_unstable_by_key(|&[ix, iy, iz]| (iz, iy, ix));

    let mut particles = Vec::with_capacity(chosen.len());
    for &[ix, iy, iz] in &chosen {
        let center = domain.cell_center(grid.n, ix, iy, iz);
        let position = match params.mode {
            PlacementMode::Lattice => center,
            PlacementMode::Stratified => {
                let mut stream =
                    crate::rng::Stream::keyed(params.seed, &[ix as u64, iy as u64, iz as u64]);
                // Falls back to the cell center if every jitter draw lands
                // off the support (the center is on it: its weight is > 0).
                let mut pos = center;
                for _ in 0..16 {
                    let u = RVec3::new(
                        stream.next_unit(),
                        stream.next_unit(),
                        stream.next_unit(),
                    );
                    let candidate = center + (u - RVec3::repeat(0.5)) * (grid.cell / 2.0);
                    if density.evaluate_density(&candidate)? > SUPPORT_TOL {
                        pos = candidate;
                        break;
                    }
                }
                pos
            }
        };
        particles.push(Particle {
            position,
            zeta: Complex64::new(0.0, 0.0),
        });
    }

    Ok(ParticleCloud {
        radius: a,
        kappa: params.kappa,
        spacing,
        domain,
        particles,
        non_passive: Vec::new(),
    })
}

/// Largest-remainder apportionment of an integer budget down the octree of
/// cell-index ranges. Capacity (number of support cells) is respected, so a
/// cell never receives more than one particle.
fn allocate(
    grid: &CellGrid,
    lo: [usize; 3],
    hi: [usize; 3],
    budget: usize,
    out: &mut Vec<[usize; 3]>,
) {
    if budget == 0 {
        return;
    }
    if hi[0] - lo[0] == 1 && hi[1] - lo[1] == 1 && hi[2] - lo[2] == 1 {
        debug_assert!(budget == 1);
        out.push(lo);
        return;
    }

    // Split every axis at its midpoint (degenerate halves are skipped).
    let mid = [
        lo[0] + ((hi[0] - lo[0]) / 2).max(1).min(hi[0] - lo[0]),
        lo[1] + ((hi[1] - lo[1]) / 2).max(1).min(hi[1] - lo[1]),
        lo[2] + ((hi[2] - lo[2]) / 2).max(1).min(hi[2] - lo[2]),
    ];
    let bounds = |axis: usize, upper: bool| -> (usize, usize) {
        if upper {
            (mid[axis], hi[axis])
        } else {
            (lo[axis], mid[axis])
        }
    };

    let mut children: Vec<([usize; 3], [usize; 3], f64, usize)> = Vec::with_capacity(8);
    for oct in 0..8usize {
        let (x0, x1) = bounds(0, oct & 1 != 0);
        let (y0, y1) = bounds(1, oct & 2 != 0);
        let (z0, z1) = bounds(2, oct & 4 != 0);
        if x0 >= x1 || y0 >= y1 || z0 >= z1 {
            continue;
        }
        let mut w = 0.0;
        let mut capacity = 0usize;
        for iz in z0..z1 {
            for iy in y0..y1 {
                for ix in x0..x1 {
                    let wc = grid.weights[grid.index(ix, iy, iz)];
                    w += wc;
                    if wc > 0.0 {
                        capacity += 1;
                    }
                }
            }
        }
        children.push(([x0, y0, z0], [x1, y1, z1], w, capacity));
    }

    let weight_sum: f64 = children.iter().map(|c| c.2).sum();
    debug_assert!(weight_sum > 0.0, "budget routed into a zero-weight node");

    let mut assigned: Vec<usize> = Vec::with_capacity(children.len());
    let mut targets: Vec<f64> = Vec::with_capacity(children.len());
    let mut total = 0usize;
    for &(_, _, w, capacity) in &children {
        let t = w / weight_sum * budget as f64;
        let base = (t.floor() as usize).min(capacity);
        targets.push(t);
        assigned.push(base);
        total += base;
    }
    // Hand out the remainder to the children hungriest relative to their
    // target, honoring capacities; ties resolved by child order.
    while total < budget {
        let mut best: Option<usize> = None;
        let mut best_desire = f64::NEG_INFINITY;
        for (i, child) in children.iter().enumerate() {
            if assigned[i] >= child.3 {
                continue;
            }
            let desire = targets[i] - assigned[i] as f64;
            if desire > best_desire {
                best_desire = desire;
                best = Some(i);
            }
        }
        let i = best.expect("capacity must cover the budget");
        assigned[i] += 1;
        total += 1;
    }

    for (i, &(clo, chi, _, _)) in children.iter().enumerate() {
        allocate(grid, clo, chi, assigned[i], out);
    }
}

/// Assigns ζ_m = h(x_m)/a^κ to every particle. Sites with Re h < 0 are
/// recorded as non-passive warnings, not rejected.
pub fn assign_impedances(
    mut cloud: ParticleCloud,
    impedance: &ScalarFieldProfile,
) -> Result<ParticleCloud, PlacementError> {
    let scale = cloud.radius.powf(cloud.kappa);
    let mut non_passive = Vec::new();
    for (m, particle) in cloud.particles.iter_mut().enumerate() {
        let h = impedance
            .evaluate(&particle.position)
            .map_err(ProfileError::from)?;
        if h.re < -SUPPORT_TOL {
            non_passive.push(m);
        }
        particle.zeta = h / scale;
    }
    cloud.non_passive = non_passive;
    Ok(cloud)
}

/// One dyadic sub-box count check: observed vs `a^{-(2-κ)} ∫_Δ N`.
#[derive(Debug, Clone, Copy)]
pub struct CountCheck {
    pub level: u32,
    pub sub_box: BoxDomain,
    pub expected: f64,
    pub observed: usize,
    pub tolerance: f64,
}

impl CountCheck {
    pub fn ok(&self) -> bool {
        (self.observed as f64 - self.expected).abs() <= self.tolerance
    }
}

/// Verifies the count law on all dyadic sub-boxes down to `max_level`
/// (level 2 means edge = 1/4 of Ω's edge). Expected counts are computed by
/// midpoint quadrature with `quad_n`³ samples per box; the tolerance is
/// max(3·sqrt(expected), 1).
pub fn verify_count_law(
    cloud: &ParticleCloud,
    density: &ScalarFieldProfile,
    max_level: u32,
    quad_n: usize,
) -> Result<Vec<CountCheck>, PlacementError> {
    let count_scale = cloud.radius.powf(2.0 - cloud.kappa);
    let mut checks = Vec::new();
    for level in 0..=max_level {
        for sub in cloud.domain.dyadic_level(level) {
            let (samples, cell) = sub.cell_centers(quad_n);
            let mut integral = 0.0;
            for p in &samples {
                integral += density.evaluate_density(p)?;
            }
            integral *= cell * cell * cell;
            let expected = integral / count_scale;
            let observed = cloud
                .particles
                .iter()
                .filter(|p| sub.contains_half_open(&p.position))
                .count();
            checks.push(CountCheck {
                level,
                sub_box: sub,
                expected,
                observed,
                tolerance: (3.0 * expected.sqrt()).max(1.0),
            });
        }
    }
    Ok(checks)
}
