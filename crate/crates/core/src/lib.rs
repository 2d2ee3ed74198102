//! Numerical laboratory for the critical Choquard equation with a steep
//! potential well,
//!
//! ```text
//!     -Δu + (λ V(x) - β) u = (|x|^{-μ} * |u|^{2μ#}) |u|^{2μ# - 2} u,   x ∈ ℝ^N,
//! ```
//!
//! where `2μ# = (2N - μ)/(N - 2)` is the upper critical exponent of the
//! Hardy–Littlewood–Sobolev inequality. The crate computes ground states of
//! the associated energy functional on discretized domains and cross-checks
//! the sharp constants, bubble asymptotics, energy-level orderings, spectral
//! limits and concentration behaviour that govern this equation.
//!
//! Module map:
//!
//! * [`params`]      — problem parameters, derived exponents, potential wells.
//! * [`grid`]        — periodic tensor grids (FFT-based calculus) and graded
//!   radial grids (high-accuracy quadrature for radial profiles).
//! * [`riesz`]       — the Riesz kernel `|x|^{-μ}`: free-space convolution on
//!   tensor grids and angular-reduced double integrals on radial grids.
//! * [`bubbles`]     — Aubin–Talenti bubbles, sharp constants, cutoff-bubble
//!   asymptotics.
//! * [`functional`]  — energy breakdowns, weak-form gradients, Nehari
//!   projection, Pohožaev residual, Brezis–Lieb defects, barycenters.
//! * [`spectra`]     — Dirichlet and Schrödinger eigenpairs, the negative/
//!   positive spectral splitting and the concave reduction map.
//! * [`solver`]      — ground-state descent in the definite and indefinite
//!   regimes, limit-domain solves, λ- and β-sweeps, multistart search.
//! * [`io`]          — raw-float field snapshots with JSON sidecars.

pub mod bubbles;
pub mod error;
pub mod functional;
pub mod grid;
pub mod io;
pub mod params;
pub mod riesz;
pub mod solver;
pub mod special;
pub mod spectra;
pub mod util;

pub use error::CoreError;
pub use grid::{RadialField, RadialGrid, TensorField, TensorGrid};
pub use params::{Exponents, Potential, PotentialKind, ProblemParams};
pub use solver::{
    BetaSweep, BetaSweepRow, IndefiniteOutcome, LambdaSweep, LambdaSweepRow, MultistartOutcome,
    MultistartSolution, SolveOptions, SolveResult,
};
pub use spectra::{DirichletEigs, DomainMask, ReducedPoint, SpectralSplit};

/// Convenience result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
