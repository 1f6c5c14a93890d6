//! Incident-field sources.
//!
//! The solvers only ever need two samples of the incident wave: E₀(x) and
//! (∇×E₀)(x). Anything implementing [`IncidentField`] can drive them; plane
//! waves are the built-in source.

use crate::geom::{complexify, cross_c, CVec3, RVec3};
use crate::greens::Wavenumber;
use num_complex::Complex64;
use thiserror::Error;

/// Transversality rejection threshold for |α·𝓔| relative to |𝓔|.
pub const TRANSVERSALITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("propagation direction must be nonzero")]
    ZeroDirection,
    #[error("amplitude must be nonzero")]
    ZeroAmplitude,
    #[error("plane wave not transverse: |alpha . E| / |E| = {0:.3e} exceeds 1e-12")]
    NotTransverse(f64),
}

/// Provider contract for incident fields: the value and the exact curl.
pub trait IncidentField: Sync {
    /// E₀(x).
    fn field(&self, x: &RVec3) -> CVec3;
    /// (∇×E₀)(x).
    fn curl(&self, x: &RVec3) -> CVec3;
}

/// Transverse plane wave 𝓔 e^{ikα·x} with |α| = 1 and α·𝓔 = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    amplitude: CVec3,
    direction: RVec3,
    k: Wavenumber,
}

impl PlaneWave {
    /// Builds a plane wave, normalizing `direction` and rejecting
    /// non-transverse amplitudes.
    pub fn new(amplitude: CVec3, direction: RVec3, k: Wavenumber) -> Result<Self, FieldError> {
        let len = direction.norm();
        if len == 0.0 || !len.is_finite() {
            return Err(FieldError::ZeroDirection);
        }
        let alpha = direction / len;
        let amp_norm = crate::geom::norm_c(&amplitude);
        if amp_norm == 0.0 {
            return Err(FieldError::ZeroAmplitude);
        }
        let dot = amplitude.x * alpha.x + amplitude.y * alpha.y + amplitude.z * alpha.z;
        let rel = dot.norm() / amp_norm;
        if rel > TRANSVERSALITY_TOL {
            return Err(FieldError::NotTransverse(rel));
        }
        Ok(Self {
            amplitude,
            direction: alpha,
            k,
        })
    }

    pub fn amplitude(&self) -> CVec3 {
        self.amplitude
    }

    pub fn direction(&self) -> RVec3 {
        self.direction
    }

    pub fn wavenumber(&self) -> Wavenumber {
        self.k
    }

    fn phase(&self, x: &RVec3) -> Complex64 {
        (Complex64::i() * self.k.value() * self.direction.dot(x)).exp()
    }
}

impl IncidentField for PlaneWave {
    fn field(&self, x: &RVec3) -> CVec3 {
        self.amplitude * self.phase(x)
    }

    fn curl(&self, x: &RVec3) -> CVec3 {
        // ∇ × (𝓔 e^{ikα·x}) = ik (α × 𝓔) e^{ikα·x}
        let axe = cross_c(&complexify(&self.direction), &self.amplitude);
        axe * (Complex64::i() * self.k.value() * self.phase(x))
    }
}
