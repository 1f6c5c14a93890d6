//! muscat — multiple scattering by clouds of small impedance particles.
//!
//! The engine covers three views of the same physics and keeps them
//! mutually checkable:
//!
//! * **Discrete**: M small particles with boundary impedances
//!   ζ_m = h(x_m)/a^κ scatter a time-harmonic wave; the unknowns are the
//!   curl moments P_m = (∇×E)(x_m) of a dense 3M×3M system
//!   ([`discrete`]).
//! * **Continuum**: as a → 0 with the particle count following
//!   `a^{-(2-κ)} ∫ N`, the sums converge to a volume integral equation,
//!   solved here by midpoint collocation ([`continuum`]).
//! * **Effective medium**: the limit behaves like a material with
//!   permeability μ(x) = μ₀ / (1 + (8π/3) i ω ε₀ h(x) N(x)); forward and
//!   inverse maps live in [`medium`].
//!
//! The [`convergence`] module orchestrates the refinement experiment tying
//! the first two together, and [`cli`] exposes the whole pipeline behind a
//! JSON-configured command-line tool with byte-stable outputs.

pub mod cli;
pub mod config;
pub mod continuum;
pub mod convergence;
pub mod discrete;
pub mod fd;
pub mod fieldexpr;
pub mod fields;
pub mod geom;
pub mod greens;
pub mod linalg;
pub mod medium;
mod moments;
pub mod output;
pub mod placement;
mod rng;
pub mod selfcheck;

pub use moments::{SolveError, SolverBackend, SolverDiagnostics};
