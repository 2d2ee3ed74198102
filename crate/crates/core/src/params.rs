//! Problem parameters, derived exponents, and the potential-well library.
//!
//! The model problem is
//!
//! ```text
//! -Δu + (λ V(x) - β) u = (|x|^{-μ} ∗ |u|^q) |u|^{q-2} u,      q = (2N - μ)/(N - 2),
//! ```
//!
//! with `V ≥ 0` vanishing on a bounded open well Ω. Potentials here are
//! smooth ramps `V(x) = height_cap · σ(dist(x, Ω)/ramp_width)` with `σ` a C²
//! monotone clamp — descent methods need differentiable energies, and only
//! continuity of `V` is structurally required.
//!
//! Validation of the standing assumptions is necessarily a finite-box proxy:
//! * (V1): `V ≥ 0`, the zero set is nonempty, stays away from the outermost
//!   grid shell (boundedness proxy), and contains the origin unless the
//!   override flag is set (annulus wells relax it deliberately).
//! * (V2): the sublevel set `{V ≤ M0}` has finite volume — proxied by it not
//!   touching the outermost shell.
//! * (V3): `liminf V > 0` at infinity — proxied by `min V` on the outermost
//!   shell being strictly positive.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::grid::{RadialField, RadialGrid, TensorField, TensorGrid};
use crate::util::smoothstep_c2;
use crate::Result;

/// Core parameter set for one problem instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Space dimension N (≥ 3 for the numerics; the sharpest statements
    /// require N ≥ 4).
    pub dim: usize,
    /// Convolution-kernel exponent μ ∈ (0, N).
    pub mu: f64,
    /// Potential-well strength λ ≥ 0.
    pub lambda: f64,
    /// Linear shift β ≥ 0.
    pub beta: f64,
    /// Whether the quadratic part is allowed to be indefinite (β above the
    /// bottom of the spectrum); requires μ < 4 so that the nonlinear
    /// second-variation form stays positive semidefinite.
    #[serde(default)]
    pub indefinite_mode: bool,
}

impl ProblemParams {
    pub fn new(dim: usize, mu: f64, lambda: f64, beta: f64) -> Result<Self> {
        let p = Self {
            dim,
            mu,
            lambda,
            beta,
            indefinite_mode: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_indefinite_mode(mut self, on: bool) -> Result<Self> {
        self.indefinite_mode = on;
        self.validate()?;
        Ok(self)
    }

    /// Check all invariants (also called after deserializing a config).
    pub fn validate(&self) -> Result<()> {
        if self.dim < 3 {
            return Err(CoreError::InvalidParams(format!(
                "dimension must be ≥ 3, got {}",
                self.dim
            )));
        }
        if !(self.mu.is_finite() && self.mu > 0.0 && self.mu < self.dim as f64) {
            return Err(CoreError::InvalidParams(format!(
                "mu must lie in (0, N) = (0, {}), got {}",
                self.dim, self.mu
            )));
        }
        // (2N - μ)/(N - 2) > 2 ⟺ μ < 4: the nonlinearity must be
        // superquadratic for the variational structure to make sense.
        if self.mu >= 4.0 {
            return Err(CoreError::InvalidParams(format!(
                "mu must be < 4 so that (2N - mu)/(N - 2) exceeds 2, got {}",
                self.mu
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(CoreError::InvalidParams(format!(
                "lambda must be ≥ 0, got {}",
                self.lambda
            )));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(CoreError::InvalidParams(format!(
                "beta must be ≥ 0, got {}",
                self.beta
            )));
        }
        if self.indefinite_mode && self.mu >= 4.0 {
            return Err(CoreError::InvalidParams(format!(
                "indefinite mode needs mu < 4 (second-variation positivity), got mu = {}",
                self.mu
            )));
        }
        Ok(())
    }

    /// Derived exponents; exact IEEE arithmetic on the given (N, μ).
    pub fn exponents(&self) -> Exponents {
        let n = self.dim as f64;
        let two_mu_star = (2.0 * n - self.mu) / (n - 2.0);
        Exponents {
            two_mu_star,
            nehari_exp: 2.0 * two_mu_star - 2.0,
            level_coeff: (n + 2.0 - self.mu) / (4.0 * n - 2.0 * self.mu),
        }
    }
}

/// Exponents derived from (N, μ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    /// Upper critical exponent q = (2N − μ)/(N − 2) for the convolution
    /// nonlinearity; always > 2.
    pub two_mu_star: f64,
    /// Homogeneity degree 2q − 2 of the nonlinear term D(u) along rays,
    /// governing the constraint-manifold projection.
    pub nehari_exp: f64,
    /// Coefficient (N + 2 − μ)/(4N − 2μ) = 1/2 − 1/(2q) relating the
    /// constrained energy to the Dirichlet-type norm at critical points.
    pub level_coeff: f64,
}

// ─── Potentials ──────────────────────────────────────────────────────────────

/// Geometry of the potential well Ω (the zero set of V).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// Ω = ball of given radius about the origin.
    BallWell { radius: f64 },
    /// Ω = axis-aligned cube of given half-width about the origin.
    BoxWell { half_width: f64 },
    /// Ω = annulus `inner < |x| < outer`; the origin is *not* in Ω.
    AnnulusWell { inner: f64, outer: f64 },
    /// Ω = ball of given radius, but V grows quadratically without bound
    /// outside it: `V = (dist/ramp_width)²` (no height cap).
    SmoothRampWell { radius: f64 },
}

/// A nonnegative potential vanishing exactly on a well Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub kind: PotentialKind,
    /// Length scale of the ramp from 0 up to the cap (or of the quadratic
    /// growth for ramp wells).
    pub ramp_width: f64,
    /// Level used by the finite-sublevel-set check.
    pub m0: f64,
    /// Plateau height of bounded wells; must exceed `m0` for the
    /// sublevel-set check to be satisfiable. Ignored by `SmoothRampWell`.
    pub height_cap: f64,
    /// Waive the "origin lies in Ω" requirement (annulus wells).
    #[serde(default)]
    pub allow_origin_outside: bool,
}

impl Potential {
    pub const DEFAULT_RAMP_WIDTH: f64 = 0.5;
    pub const DEFAULT_M0: f64 = 1.0;
    pub const DEFAULT_HEIGHT_CAP: f64 = 2.0;

    pub fn new(kind: PotentialKind) -> Result<Self> {
        let p = Self {
            kind,
            ramp_width: Self::DEFAULT_RAMP_WIDTH,
            m0: Self::DEFAULT_M0,
            height_cap: Self::DEFAULT_HEIGHT_CAP,
            allow_origin_outside: matches!(kind, PotentialKind::AnnulusWell { .. }),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn ball_well(radius: f64) -> Result<Self> {
        Self::new(PotentialKind::BallWell { radius })
    }

    pub fn box_well(half_width: f64) -> Result<Self> {
        Self::new(PotentialKind::BoxWell { half_width })
    }

    pub fn annulus_well(inner: f64, outer: f64) -> Result<Self> {
        Self::new(PotentialKind::AnnulusWell { inner, outer })
    }

    pub fn smooth_ramp_well(radius: f64) -> Result<Self> {
        Self::new(PotentialKind::SmoothRampWell { radius })
    }

    /// Check all invariants (also called after deserializing a config).
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(CoreError::InvalidParams(format!(
                    "{what} must be positive and finite, got {v}"
                )))
            }
        };
        match self.kind {
            PotentialKind::BallWell { radius } => pos(radius, "ball-well radius")?,
            PotentialKind::BoxWell { half_width } => pos(half_width, "box-well half-width")?,
            PotentialKind::AnnulusWell { inner, outer } => {
                pos(inner, "annulus inner radius")?;
                pos(outer, "annulus outer radius")?;
                if inner >= outer {
                    return Err(CoreError::InvalidParams(format!(
                        "annulus needs inner < outer, got {inner} ≥ {outer}"
                    )));
                }
            }
            PotentialKind::SmoothRampWell { radius } => pos(radius, "ramp-well radius")?,
        }
        pos(self.ramp_width, "ramp width")?;
        pos(self.m0, "sublevel threshold m0")?;
        if !matches!(self.kind, PotentialKind::SmoothRampWell { .. }) {
            pos(self.height_cap, "height cap")?;
            if self.height_cap <= self.m0 {
                return Err(CoreError::InvalidParams(format!(
                    "height cap {} must exceed the sublevel threshold m0 = {} \
                     for the sublevel set to be bounded",
                    self.height_cap, self.m0
                )));
            }
        }
        Ok(())
    }

    /// Euclidean distance from `x` to the closure of the well Ω.
    pub fn dist_to_well(&self, x: &[f64]) -> f64 {
        match self.kind {
            PotentialKind::BallWell { radius } | PotentialKind::SmoothRampWell { radius } => {
                (norm(x) - radius).max(0.0)
            }
            PotentialKind::BoxWell { half_width } => {
                let mut acc = 0.0;
                for &c in x {
                    let d = (c.abs() - half_width).max(0.0);
                    acc += d * d;
                }
                acc.sqrt()
            }
            PotentialKind::AnnulusWell { inner, outer } => {
                let r = norm(x);
                (inner - r).max(r - outer).max(0.0)
            }
        }
    }

    /// Evaluate V(x).
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let d = self.dist_to_well(x);
        match self.kind {
            PotentialKind::SmoothRampWell { .. } => {
                let t = d / self.ramp_width;
                t * t
            }
            _ => self.height_cap * smoothstep_c2(d / self.ramp_width),
        }
    }

    /// Whether `x` lies in the closure of Ω.
    pub fn in_well(&self, x: &[f64]) -> bool {
        self.dist_to_well(x) == 0.0
    }

    /// Whether V is a radial function (box wells are not).
    pub fn is_radial(&self) -> bool {
        !matches!(self.kind, PotentialKind::BoxWell { .. })
    }

    /// Sample onto a tensor grid.
    pub fn sample_tensor(&self, grid: &std::sync::Arc<TensorGrid>) -> TensorField {
        TensorField::from_fn(std::sync::Arc::clone(grid), |x| self.evaluate(x))
            .expect("potentials are finite everywhere")
            .with_label("V")
    }

    /// Sample the radial profile V(r); rejects non-radial kinds.
    pub fn sample_radial(&self, grid: &std::sync::Arc<RadialGrid>) -> Result<RadialField> {
        if !self.is_radial() {
            return Err(CoreError::Unsupported(
                "box wells are not radial; use a tensor grid".into(),
            ));
        }
        Ok(RadialField::from_fn(std::sync::Arc::clone(grid), |r| self.evaluate(&[r]))?
            .with_label("V"))
    }

    /// Run the finite-box assumption checks against a tensor grid.
    pub fn validate_on_grid(&self, grid: &std::sync::Arc<TensorGrid>) -> ValidationReport {
        let n = grid.n();
        let dim = grid.dim();
        let field = self.sample_tensor(grid);
        let data = field.as_slice();

        let mut min_v = f64::INFINITY;
        let mut zero_count = 0usize;
        let mut sublevel_count = 0usize;
        let mut shell_min = f64::INFINITY;
        let mut sublevel_touches_shell = false;

        let mut idx = [0usize; 5];
        for &v in data {
            min_v = min_v.min(v);
            if v == 0.0 {
                zero_count += 1;
            }
            let sub = v <= self.m0;
            if sub {
                sublevel_count += 1;
            }
            let on_shell = (0..dim).any(|a| idx[a] == 0 || idx[a] == n - 1);
            if on_shell {
                shell_min = shell_min.min(v);
                if sub {
                    sublevel_touches_shell = true;
                }
            }
            // Row-major increment.
            for a in (0..dim).rev() {
                idx[a] += 1;
                if idx[a] < n {
                    break;
                }
                idx[a] = 0;
            }
        }

        let origin = [0.0f64; 5];
        let origin_in_zero_set = self.in_well(&origin[..dim]);
        let zero_set_nonempty = zero_count > 0;
        let zero_set_bounded_in_box = shell_min > 0.0;

        let nonneg = min_v >= 0.0;
        let v1 = nonneg
            && zero_set_nonempty
            && zero_set_bounded_in_box
            && (origin_in_zero_set || self.allow_origin_outside);
        let v2 = !sublevel_touches_shell && sublevel_count > 0;
        let v3 = shell_min > 0.0;

        let mut notes = vec![
            "boundedness and behavior at infinity are checked on the finite box only \
             (outermost-shell proxy)"
                .to_string(),
        ];
        if !zero_set_nonempty {
            notes.push("zero set of V is empty on this grid".into());
        }
        if !zero_set_bounded_in_box {
            notes.push("zero/low values of V reach the outermost grid shell; the well is \
                        not compactly contained in the box"
                .into());
        }
        if !origin_in_zero_set {
            notes.push(if self.allow_origin_outside {
                "origin not in the zero set (waived by override flag)".into()
            } else {
                "origin not in the zero set of V".into()
            });
        }

        ValidationReport {
            min_v,
            zero_set_fraction: zero_count as f64 / data.len() as f64,
            sublevel_fraction: sublevel_count as f64 / data.len() as f64,
            boundary_shell_min: shell_min,
            origin_in_zero_set,
            nonneg_pass: nonneg,
            well_pass: v1,
            sublevel_pass: v2,
            infinity_pass: v3,
            notes,
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Outcome of the finite-box potential checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Minimum of V over the grid (must be ≥ 0).
    pub min_v: f64,
    /// Fraction of grid points with V = 0.
    pub zero_set_fraction: f64,
    /// Fraction of grid points with V ≤ m0.
    pub sublevel_fraction: f64,
    /// Minimum of V over the outermost grid shell.
    pub boundary_shell_min: f64,
    /// Whether the origin lies in the closed well.
    pub origin_in_zero_set: bool,
    /// V ≥ 0 everywhere on the grid.
    pub nonneg_pass: bool,
    /// Nonnegativity + nonempty bounded well (+ origin membership unless waived).
    pub well_pass: bool,
    /// Sublevel set {V ≤ m0} nonempty and compactly contained in the box.
    pub sublevel_pass: bool,
    /// V strictly positive on the outermost shell.
    pub infinity_pass: bool,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.nonneg_pass && self.well_pass && self.sublevel_pass && self.infinity_pass
    }
}
