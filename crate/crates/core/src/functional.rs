//! The energy functional, its gradient, and the variational probes built on
//! top of it.
//!
//! For a field u, potential V ≥ 0 and parameters (λ, β, μ) the energy is
//!
//! ```text
//!     J(u) = ½ ∫ |∇u|² + (λV(x) − β) u²  −  (1/2q) D(u),
//!     D(u) = ∫∫ |u(x)|^q |x−y|^{-μ} |u(y)|^q dx dy,   q = (2N−μ)/(N−2),
//! ```
//!
//! split into its stored parts ([`EnergyBreakdown`]). The module provides
//!
//! * the weak-form gradient −Δu + (λV−β)u − (|·|^{-μ} ∗ |u|^q)|u|^{q−2}u
//!   (spectral Laplacian, exact adjoint of the discrete energy),
//! * the closed-form Nehari projection t(u) = (A/D)^{1/(2q−2)},
//! * the scale identity (Pohožaev) residual for constant potentials,
//! * the two-bump nonlocal separation defect |D(u+τv) − D(u) − D(τv)|,
//! * barycenters (plain and truncated), and
//! * the empirical coercivity ratio inf A(u)/∫u² over random smooth fields.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::grid::tensor::par_indexed;
use crate::grid::{RadialField, TensorField};
use crate::params::ProblemParams;
use crate::riesz::{RadialRieszTable, RieszOperator};
use crate::util::det_sum;
use crate::Result;

/// Fraction of the sup norm below which a boundary-shell sample counts as
/// "effectively zero" for compact-support checks.
const SUPPORT_TOL: f64 = 1e-8;
/// Number of boundary cell layers that must be effectively zero.
const SUPPORT_LAYERS: usize = 2;

// ─── Energy breakdown ────────────────────────────────────────────────────────

/// The energy value together with every part it is assembled from.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// ∫ |∇u|².
    pub dirichlet: f64,
    /// λ ∫ V u².
    pub potential: f64,
    /// ∫ u².
    pub mass: f64,
    /// D(u).
    pub nonlocal: f64,
    /// A(u) = dirichlet + potential − β·mass.
    pub quadratic_form: f64,
    /// J(u) = A/2 − D/(2q), assembled from the stored parts.
    pub j: f64,
    /// The exponent q used in the nonlocal term.
    pub two_mu_star: f64,
}

impl EnergyBreakdown {
    pub(crate) fn assemble(
        dirichlet: f64,
        potential: f64,
        mass: f64,
        nonlocal: f64,
        beta: f64,
        two_mu_star: f64,
    ) -> Result<Self> {
        let quadratic_form = dirichlet + potential - beta * mass;
        let j = 0.5 * quadratic_form - nonlocal / (2.0 * two_mu_star);
        if !j.is_finite() {
            return Err(CoreError::NonFinite(format!(
                "energy is not finite: A = {quadratic_form}, D = {nonlocal}"
            )));
        }
        Ok(Self {
            dirichlet,
            potential,
            mass,
            nonlocal,
            quadratic_form,
            j,
        two_mu_star,
        })
    }

    /// Recompute J from the stored parts; equals `self.j` bit-for-bit.
    pub fn j_from_parts(&self) -> f64 {
        0.5 * self.quadratic_form - self.nonlocal / (2.0 * self.two_mu_star)
    }

    /// Squared well norm ‖u‖_λ² = ∫ |∇u|² + (λV + 1) u².
    pub fn norm_lambda_sq(&self) -> f64 {
        self.dirichlet + self.potential + self.mass
    }

    /// The positive quadratic form A(u), the squared definite-regime norm.
    /// `None` when A ≤ 0 (indefinite regime).
    pub fn norm_quadratic_sq(&self) -> Option<f64> {
        (self.quadratic_form > 0.0).then_some(self.quadratic_form)
    }
}

pub(crate) fn check_tensor_setup(
    u: &TensorField,
    params: &ProblemParams,
    v: &TensorField,
    op: &RieszOperator,
) -> Result<()> {
    params.validate()?;
    if u.grid() != v.grid() {
        return Err(CoreError::GridMismatch(
            "field and potential live on different grids".into(),
        ));
    }
    if u.grid() != op.grid() {
        return Err(CoreError::GridMismatch(
            "field and convolution operator live on different grids".into(),
        ));
    }
    if u.grid().dim() != params.dim {
        return Err(CoreError::GridMismatch(format!(
            "grid dimension {} differs from parameter dimension {}",
            u.grid().dim(),
            params.dim
        )));
    }
    if (op.mu() - params.mu).abs() > 1e-12 {
        return Err(CoreError::InvalidParams(format!(
            "operator kernel exponent {} differs from parameter mu {}",
            op.mu(),
            params.mu
        )));
    }
    Ok(())
}

/// Evaluate the energy and all its parts on a tensor grid.
pub fn energy(
    u: &TensorField,
    params: &ProblemParams,
    v: &TensorField,
    op: &RieszOperator,
) -> Result<EnergyBreakdown> {
    check_tensor_setup(u, params, v, op)?;
    let q = params.exponents().two_mu_star;
    let dirichlet = u.grad_sq_integral();
    let usq = u.map(|x| x * x);
    let potential = params.lambda * v.dot(&usq);
    let mass = u.mass();
    let nonlocal = op.double_integral_d(u, q)?;
    EnergyBreakdown::assemble(dirichlet, potential, mass, nonlocal, params.beta, q)
}

/// Evaluate the energy on a graded radial grid (radial fields only). `v` is
/// the radial potential profile; `None` means V ≡ 0 (the limit functional).
pub fn energy_radial(
    u: &RadialField,
    params: &ProblemParams,
    v: Option<&[f64]>,
    table: &RadialRieszTable,
) -> Result<EnergyBreakdown> {
    params.validate()?;
    if u.grid() != table.grid() {
        return Err(CoreError::GridMismatch(
            "field and radial convolution table live on different grids".into(),
        ));
    }
    if u.grid().dim() != params.dim {
        return Err(CoreError::GridMismatch(format!(
            "grid dimension {} differs from parameter dimension {}",
            u.grid().dim(),
            params.dim
        )));
    }
    if (table.mu() - params.mu).abs() > 1e-12 {
        return Err(CoreError::InvalidParams(format!(
            "table kernel exponent {} differs from parameter mu {}",
            table.mu(),
            params.mu
        )));
    }
    let q = params.exponents().two_mu_star;
    let dirichlet = u.grad_sq_integral();
    let potential = match v {
        Some(vs) => {
            if vs.len() != u.grid().len() {
                return Err(CoreError::GridMismatch(
                    "potential sample count differs from the radial grid".into(),
                ));
            }
            let dens: Vec<f64> = u
                .data()
                .iter()
                .zip(vs)
                .map(|(ui, vi)| vi * ui * ui)
                .collect();
            params.lambda * u.grid().integrate(&dens)
        }
        None => 0.0,
    };
    let mass = u.mass();
    let nonlocal = table.double_integral_d(u, q)?;
    EnergyBreakdown::assemble(dirichlet, potential, mass, nonlocal, params.beta, q)
}

// ─── Gradient ────────────────────────────────────────────────────────────────

/// Weak-form gradient of J at u:
/// −Δu + (λV − β)u − (|·|^{-μ} ∗ |u|^q) |u|^{q−2} u.
/// Pairing it with φ under ∫·φ gives the directional derivative of J.
pub fn gradient(
    u: &TensorField,
    params: &ProblemParams,
    v: &TensorField,
    op: &RieszOperator,
) -> Result<TensorField> {
    check_tensor_setup(u, params, v, op)?;
    let q = params.exponents().two_mu_star;
    let dens = u.map(|x| x.abs().powf(q));
    let phi = op.convolve(&dens)?;
    let lap = u.laplacian();
    let lambda = params.lambda;
    let beta = params.beta;
    let data: Vec<f64> = u
        .as_slice()
        .iter()
        .zip(lap.as_slice())
        .zip(v.as_slice())
        .zip(phi.as_slice())
        .map(|(((ui, li), vi), pi)| {
            -li + (lambda * vi - beta) * ui - pi * ui.abs().powf(q - 2.0) * ui
        })
        .collect();
    TensorField::from_data(Arc::clone(u.grid()), data)
}

// ─── Nehari projection ───────────────────────────────────────────────────────

/// Result of projecting a field onto the Nehari manifold.
#[derive(Debug, Clone)]
pub struct NehariProjection {
    /// The fibering maximizer t(u).
    pub t: f64,
    /// t·u.
    pub projected: TensorField,
    /// A(u) of the *input* field.
    pub quadratic_form: f64,
    /// D(u) of the *input* field.
    pub nonlocal: f64,
    /// q, stored for the residual identity.
    pub two_mu_star: f64,
}

impl NehariProjection {
    /// ⟨J′(tu), tu⟩ = t²A − t^{2q}D; zero (to rounding) by construction.
    pub fn nehari_residual(&self) -> f64 {
        let t = self.t;
        t * t * self.quadratic_form
            - t.powf(2.0 * self.two_mu_star) * self.nonlocal
    }

    /// J(tu) through the on-manifold identity
    /// J = (½ − 1/(2q)) · t²A = level_coeff · t²A.
    pub fn level(&self) -> f64 {
        let q = self.two_mu_star;
        (0.5 - 0.5 / q) * self.t * self.t * self.quadratic_form
    }
}

/// Closed-form Nehari projection: t = (A/D)^{1/(2q−2)}.
///
/// Requires A(u) > 0 (definite regime) and D(u) > 0 (nonzero field); the
/// respective failures are signalled as distinct errors so callers can fall
/// back to the indefinite machinery.
pub fn nehari_project(
    u: &TensorField,
    params: &ProblemParams,
    v: &TensorField,
    op: &RieszOperator,
) -> Result<NehariProjection> {
    let parts = energy(u, params, v, op)?;
    let a = parts.quadratic_form;
    let d = parts.nonlocal;
    if d <= 0.0 {
        return Err(CoreError::InvalidParams(
            "zero field: the nonlocal term vanishes, no projection exists".into(),
        ));
    }
    if a <= 0.0 {
        return Err(CoreError::OutsideNehariRegime { a });
    }
    let exps = params.exponents();
    let t = (a / d).powf(1.0 / exps.nehari_exp);
    Ok(NehariProjection {
        t,
        projected: u.scaled(t),
        quadratic_form: a,
        nonlocal: d,
        two_mu_star: exps.two_mu_star,
    })
}

/// The fibering map t ↦ J(tu) expressed through the homogeneous parts:
/// t²a/2 − t^{2q}d/(2q). Exact for the discrete functional, so a 1-D search
/// over this scalar map is equivalent to re-evaluating J(tu).
pub fn fibering_value(a: f64, d: f64, q: f64, t: f64) -> f64 {
    0.5 * t * t * a - t.powf(2.0 * q) * d / (2.0 * q)
}

// ─── Scale identity (constant potential) ─────────────────────────────────────

/// Residual of the scale (Pohožaev-type) identity for constant potential c0:
///
/// ```text
///     (N−2)/2 ∫|∇u|² + c0·N/2 ∫u² − (N−2)/2 D(u).
/// ```
///
/// Vanishes for solutions of −Δu + c0 u = (|·|^{-μ}∗|u|^q)|u|^{q−2}u; a
/// strictly positive value at c0 > 0 quantifies why no nontrivial solution
/// exists there. Requires u to be compactly supported well inside the box
/// (the identity is a whole-space statement).
pub fn pohozaev_residual(u: &TensorField, c0: f64, op: &RieszOperator) -> Result<f64> {
    if u.grid() != op.grid() {
        return Err(CoreError::GridMismatch(
            "field and convolution operator live on different grids".into(),
        ));
    }
    let sup = u.inf_norm();
    if sup == 0.0 {
        return Ok(0.0);
    }
    let shell = boundary_shell_max(u, SUPPORT_LAYERS);
    if shell > SUPPORT_TOL * sup {
        return Err(CoreError::Unsupported(format!(
            "support touches the box boundary (shell max {shell:.3e} vs sup {sup:.3e}); \
             the scale identity needs compact support inside the box"
        )));
    }
    let n = u.grid().dim() as f64;
    let q = (2.0 * n - op.mu()) / (n - 2.0);
    let dirichlet = u.grad_sq_integral();
    let mass = u.mass();
    let d = op.double_integral_d(u, q)?;
    Ok(0.5 * (n - 2.0) * dirichlet + 0.5 * n * c0 * mass - 0.5 * (n - 2.0) * d)
}

/// Radial-grid version of [`pohozaev_residual`] (the graded grid already
/// represents all of space, so no support restriction applies).
pub fn pohozaev_residual_radial(
    u: &RadialField,
    c0: f64,
    table: &RadialRieszTable,
) -> Result<f64> {
    if u.grid() != table.grid() {
        return Err(CoreError::GridMismatch(
            "field and radial convolution table live on different grids".into(),
        ));
    }
    let n = u.grid().dim() as f64;
    let q = (2.0 * n - table.mu()) / (n - 2.0);
    let dirichlet = u.grad_sq_integral();
    let mass = u.mass();
    let d = table.double_integral_d(u, q)?;
    Ok(0.5 * (n - 2.0) * dirichlet + 0.5 * n * c0 * mass - 0.5 * (n - 2.0) * d)
}

// ─── Nonlocal separation defect ──────────────────────────────────────────────

/// |D(u + τ_a v) − D(u) − D(τ_a v)| where τ_a shifts v by whole cells.
///
/// For bumps with disjoint supports the defect reduces to twice the nonlocal
/// cross term, which decays like |a|^{-μ} — it never vanishes exactly, but
/// separating the bumps makes the nonlocal energy additive to leading order.
pub fn brezis_lieb_defect(
    u: &TensorField,
    v: &TensorField,
    shift: &[i64],
    op: &RieszOperator,
) -> Result<f64> {
    if u.grid() != v.grid() || u.grid() != op.grid() {
        return Err(CoreError::GridMismatch(
            "both fields and the operator must share one grid".into(),
        ));
    }
    if shift.len() != u.grid().dim() {
        return Err(CoreError::InvalidParams(format!(
            "shift has {} entries for a {}-dimensional grid",
            shift.len(),
            u.grid().dim()
        )));
    }
    let n = u.grid().dim() as f64;
    let q = (2.0 * n - op.mu()) / (n - 2.0);
    let shifted = v.shift_cells(shift);
    for (field, name) in [(u, "first bump"), (&shifted, "shifted second bump")] {
        let sup = field.inf_norm();
        if sup == 0.0 {
            continue;
        }
        let shell = boundary_shell_max(field, SUPPORT_LAYERS);
        if shell > SUPPORT_TOL * sup {
            return Err(CoreError::Unsupported(format!(
                "{name} overlaps the box boundary (shell max {shell:.3e} vs sup {sup:.3e})"
            )));
        }
    }
    let together = op.double_integral_d(&u.add_scaled(&shifted, 1.0), q)?;
    let alone_u = op.double_integral_d(u, q)?;
    let alone_v = op.double_integral_d(&shifted, q)?;
    Ok((together - alone_u - alone_v).abs())
}

// ─── Barycenters ─────────────────────────────────────────────────────────────

/// α(u) = ∫ x |∇u|² / ∫ |∇u|², one entry per axis.
pub fn barycenter(u: &TensorField) -> Result<Vec<f64>> {
    weighted_barycenter(u, |_| 1.0)
}

/// Truncated barycenter: the weight η(|x|) = min(1, R/|x|) caps the lever arm
/// at radius R, making the map bounded on all of space.
pub fn truncated_barycenter(u: &TensorField, r: f64) -> Result<Vec<f64>> {
    if !(r.is_finite() && r > 0.0) {
        return Err(CoreError::InvalidParams(format!(
            "truncation radius must be positive, got {r}"
        )));
    }
    weighted_barycenter(u, move |x| {
        let t = norm(x);
        if t <= r {
            1.0
        } else {
            r / t
        }
    })
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn weighted_barycenter(
    u: &TensorField,
    eta: impl Fn(&[f64]) -> f64 + Sync,
) -> Result<Vec<f64>> {
    let grid = u.grid().as_ref();
    let dim = grid.dim();
    let len = grid.points();
    let mut density = vec![0.0; len];
    for axis in 0..dim {
        let d = u.derivative(axis);
        for (acc, g) in density.iter_mut().zip(d.as_slice()) {
            *acc += g * g;
        }
    }
    let total = det_sum(&density) * grid.cell_volume();
    if total <= 0.0 {
        return Err(CoreError::InvalidParams(
            "barycenter of a field with zero Dirichlet energy".into(),
        ));
    }
    let mut center = Vec::with_capacity(dim);
    for axis in 0..dim {
        let mut weighted = density.clone();
        par_indexed(&mut weighted, grid.n(), dim, |idx, w| {
            let x = grid.position(&idx[..dim]);
            *w *= eta(&x[..dim]) * x[axis];
        });
        center.push(det_sum(&weighted) * grid.cell_volume() / total);
    }
    Ok(center)
}

// ─── Coercivity probe ────────────────────────────────────────────────────────

/// Empirical coercivity ratio: min over `samples` random smooth unit-mass
/// fields of A(u)/∫u² = (∫|∇u|² + λ∫Vu² − β∫u²)/∫u². The same seed produces
/// the same fields for every (λ, β), so the ratio is exactly nondecreasing
/// in λ (V ≥ 0) and decreasing in β.
pub fn coercivity_ratio(
    v: &TensorField,
    lambda: f64,
    beta: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(CoreError::InvalidParams("need at least one sample".into()));
    }
    let mut worst = f64::INFINITY;
    for k in 0..samples {
        let u = TensorField::random_smooth(Arc::clone(v.grid()), seed ^ (k as u64), 0.35);
        let usq = u.map(|x| x * x);
        let mass = u.mass();
        let a = u.grad_sq_integral() + lambda * v.dot(&usq) - beta * mass;
        worst = worst.min(a / mass);
    }
    Ok(worst)
}

// ─── Support helpers ─────────────────────────────────────────────────────────

/// Max |u| over the outermost `layers` cell shells of the box.
fn boundary_shell_max(u: &TensorField, layers: usize) -> f64 {
    let grid = u.grid().as_ref();
    let n = grid.n();
    let dim = grid.dim();
    let mut masked = u.as_slice().to_vec();
    par_indexed(&mut masked, n, dim, |idx, v| {
        let on_shell = idx[..dim]
            .iter()
            .any(|&i| i < layers || i >= n - layers);
        if !on_shell {
            *v = 0.0;
        }
    });
    masked.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}
