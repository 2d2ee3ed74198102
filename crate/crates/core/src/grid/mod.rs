//! Discretized domains. Two backing grid families are provided:
//!
//! * [`TensorGrid`] — a periodic box `[-L, L)^N` sampled on `n` points per
//!   axis (`n` a power of two), with FFT-based spectral calculus and exact
//!   Parseval book-keeping. This is the domain for potential-well solves.
//! * [`RadialGrid`] — a graded one-dimensional grid on `[0, r_max]` carrying
//!   quadrature weights for the full `ℝ^N` measure `|S^{N-1}| r^{N-1} dr`.
//!   This is the high-accuracy backend for radial profiles (bubbles, sharp
//!   constants, asymptotic tables).

mod radial;
pub(crate) mod tensor;

pub use radial::{RadialField, RadialGrid};
pub use tensor::{Spectrum, TensorField, TensorGrid};
