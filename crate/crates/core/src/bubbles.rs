//! Closed-form constants and extremal families.
//!
//! * `C(N,μ)` — the sharp constant of the convolution inequality
//!   ∫∫ f(x) g(y) |x-y|^{-μ} ≤ C |f|_t |g|_t, t = 2N/(2N-μ), evaluated from
//!   its Γ-function formula.
//! * `S` — the best constant of ∫|∇u|² ≥ S (∫|u|^{2*})^{2/2*}, obtained
//!   numerically as the Rayleigh quotient of the extremal profile
//!   `U(x) = [N(N-2)]^{(N-2)/4} (1+|x|²)^{-(N-2)/2}` so that every number
//!   stays traceable to this artifact's own quadrature.
//! * `S_HL` — the nonlocal analogue, computed two independent ways: via the
//!   relation `S_HL = S / C(N,μ)^{(N-2)/(2N-μ)}` and as the direct quotient
//!   `∫|∇U|² / D(U)^{(N-2)/(2N-μ)}`; the two must agree.
//! * `Ũ = S^{(N-μ)(2-N)/(4(N-μ+2))} C(N,μ)^{(2-N)/(2(N-μ+2))} U` — the
//!   normalized minimizer with `∫|∇Ũ|² = D(Ũ) = S_HL^{(2N-μ)/(N-μ+2)}`.
//! * `c_* = (N+2-μ)/(4N-2μ) · S_HL^{(2N-μ)/(N+2-μ)}` — the critical level,
//!   which equals the free energy `½∫|∇Ũ|² - D(Ũ)/(2q)` of Ũ.
//! * Cutoff bubbles `u_ε = ψ·U_ε` with `U_ε = ε^{(2-N)/2} U(·/ε)` and their
//!   small-ε expansions: the gradient remainder is O(ε^{N-2}) and the mass
//!   is `d ε²|ln ε| + O(ε²)` for N = 4, `d ε² + O(ε^{N-2})` for N ≥ 5.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::grid::RadialGrid;
use crate::riesz::{weighted_sum, RadialRieszTable};
use crate::special::gamma;
use crate::util::{smoothstep_c2, smoothstep_c2_deriv};
use crate::Result;

// ─── Closed-form constants ───────────────────────────────────────────────────

/// Sharp convolution-inequality constant
/// `C(N,μ) = π^{μ/2} Γ(N/2-μ/2)/Γ(N-μ/2) · (Γ(N/2)/Γ(N))^{-1+μ/N}`.
pub fn hls_constant(dim: usize, mu: f64) -> Result<f64> {
    if dim < 3 {
        return Err(CoreError::InvalidParams(format!(
            "dimension must be ≥ 3, got {dim}"
        )));
    }
    if !(mu.is_finite() && mu > 0.0 && mu < dim as f64) {
        return Err(CoreError::InvalidParams(format!(
            "mu must lie in (0, N) = (0, {dim}), got {mu}"
        )));
    }
    let n = dim as f64;
    Ok(PI.powf(0.5 * mu) * gamma(0.5 * (n - mu)) / gamma(n - 0.5 * mu)
        * (gamma(0.5 * n) / gamma(n)).powf(-1.0 + mu / n))
}

// ─── Bubble family ───────────────────────────────────────────────────────────

/// The extremal profile U, its dilations U_ε, and the cutoff bubbles
/// u_ε = ψ·U_ε. The cutoff ψ is the C² quintic plateau bump: 1 on [0, δ],
/// 0 on [2δ, ∞) (the asymptotic constants absorb the profile choice).
#[derive(Debug, Clone, Copy)]
pub struct BubbleFamily {
    dim: usize,
    mu: f64,
    delta: f64,
    /// U(0) = [N(N-2)]^{(N-2)/4}.
    amplitude: f64,
}

impl BubbleFamily {
    pub fn new(dim: usize, mu: f64, delta: f64) -> Result<Self> {
        if dim < 3 {
            return Err(CoreError::InvalidParams(format!(
                "dimension must be ≥ 3, got {dim}"
            )));
        }
        if !(mu.is_finite() && mu > 0.0 && mu < dim as f64) {
            return Err(CoreError::InvalidParams(format!(
                "mu must lie in (0, N), got {mu}"
            )));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(CoreError::InvalidParams(format!(
                "cutoff radius must be positive, got {delta}"
            )));
        }
        let n = dim as f64;
        Ok(Self {
            dim,
            mu,
            delta,
            amplitude: (n * (n - 2.0)).powf(0.25 * (n - 2.0)),
        })
    }

    /// Default cutoff radius δ = 1.
    pub fn standard(dim: usize, mu: f64) -> Result<Self> {
        Self::new(dim, mu, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Nonlinearity power q = (2N - μ)/(N - 2).
    pub fn q(&self) -> f64 {
        (2.0 * self.dim as f64 - self.mu) / (self.dim as f64 - 2.0)
    }

    /// U(r) = [N(N-2)]^{(N-2)/4} (1+r²)^{-(N-2)/2}.
    pub fn u(&self, r: f64) -> f64 {
        let a = 0.5 * (self.dim as f64 - 2.0);
        self.amplitude * (1.0 + r * r).powf(-a)
    }

    /// dU/dr, in closed form.
    pub fn u_prime(&self, r: f64) -> f64 {
        let n = self.dim as f64;
        -(n - 2.0) * self.amplitude * r * (1.0 + r * r).powf(-0.5 * n)
    }

    /// ΔU(r) = -N(N-2) U(0) (1+r²)^{-(N+2)/2}, in closed form.
    pub fn u_laplacian(&self, r: f64) -> f64 {
        let n = self.dim as f64;
        -n * (n - 2.0) * self.amplitude * (1.0 + r * r).powf(-0.5 * (n + 2.0))
    }

    /// U_ε(r) = ε^{(2-N)/2} U(r/ε).
    pub fn u_eps(&self, eps: f64, r: f64) -> f64 {
        let n = self.dim as f64;
        eps.powf(0.5 * (2.0 - n)) * self.u(r / eps)
    }

    /// d U_ε/dr = ε^{-N/2} U'(r/ε).
    pub fn u_eps_prime(&self, eps: f64, r: f64) -> f64 {
        let n = self.dim as f64;
        eps.powf(-0.5 * n) * self.u_prime(r / eps)
    }

    /// Cutoff profile: 1 on [0, δ], quintic descent, 0 on [2δ, ∞).
    pub fn psi(&self, r: f64) -> f64 {
        1.0 - smoothstep_c2(r / self.delta - 1.0)
    }

    pub fn psi_prime(&self, r: f64) -> f64 {
        -smoothstep_c2_deriv(r / self.delta - 1.0) / self.delta
    }

    /// u_ε(r) = ψ(r) U_ε(r).
    pub fn cutoff_bubble(&self, eps: f64, r: f64) -> f64 {
        self.psi(r) * self.u_eps(eps, r)
    }

    /// d u_ε/dr = ψ' U_ε + ψ U_ε'.
    pub fn cutoff_bubble_prime(&self, eps: f64, r: f64) -> f64 {
        self.psi_prime(r) * self.u_eps(eps, r) + self.psi(r) * self.u_eps_prime(eps, r)
    }

    /// The normalization turning U into the minimizer Ũ = factor · U:
    /// factor = S^{(N-μ)(2-N)/(4(N-μ+2))} · C(N,μ)^{(2-N)/(2(N-μ+2))}.
    pub fn u_tilde_factor(&self, sobolev: f64, c_hls: f64) -> f64 {
        let n = self.dim as f64;
        let m = self.mu;
        sobolev.powf((n - m) * (2.0 - n) / (4.0 * (n - m + 2.0)))
            * c_hls.powf((2.0 - n) / (2.0 * (n - m + 2.0)))
    }
}

// ─── Quotient-based constants ────────────────────────────────────────────────

/// Best local constant S as the Rayleigh quotient of U on the given grid:
/// ∫|∇U|² / (∫|U|^{2*})^{2/2*} with 2* = 2N/(N-2). Derivatives are analytic,
/// so the only numerical content is the quadrature.
pub fn sobolev_constant(grid: &Arc<RadialGrid>) -> Result<f64> {
    let dim = grid.dim();
    if dim < 3 {
        return Err(CoreError::InvalidParams(format!(
            "Sobolev quotient needs dimension ≥ 3, got {dim}"
        )));
    }
    let family = BubbleFamily::new(dim, 1.0, 1.0)?; // μ unused by U itself
    Ok(rayleigh_quotient_local(grid, |r| family.u(r), |r| family.u_prime(r)))
}

/// Rayleigh quotient ∫ f'² / (∫ |f|^{2*})^{2/2*} for an analytic radial
/// profile (used to check dilation/scaling invariance of S).
pub fn rayleigh_quotient_local(
    grid: &Arc<RadialGrid>,
    f: impl Fn(f64) -> f64,
    fp: impl Fn(f64) -> f64,
) -> f64 {
    let n = grid.dim() as f64;
    let two_star = 2.0 * n / (n - 2.0);
    let gradsq: Vec<f64> = grid.nodes().iter().map(|&r| fp(r).powi(2)).collect();
    let dens: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| f(r).abs().powf(two_star))
        .collect();
    let num = weighted_sum(grid, &gradsq);
    let den = weighted_sum(grid, &dens).powf(2.0 / two_star);
    num / den
}

/// The nonlocal best constant, two ways.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShlEstimate {
    /// S / C(N,μ)^{(N-2)/(2N-μ)} with S from the local quotient.
    pub via_relation: f64,
    /// Direct quotient ∫|∇U|² / D(U)^{(N-2)/(2N-μ)}.
    pub via_quotient: f64,
}

impl ShlEstimate {
    pub fn relative_disagreement(&self) -> f64 {
        (self.via_relation - self.via_quotient).abs() / self.via_relation
    }
}

/// Compute both S_HL estimates on one grid.
pub fn shl_constant(grid: &Arc<RadialGrid>, mu: f64) -> Result<ShlEstimate> {
    let dim = grid.dim();
    let n = dim as f64;
    let s = sobolev_constant(grid)?;
    let c = hls_constant(dim, mu)?;
    let family = BubbleFamily::standard(dim, mu)?;
    let table = RadialRieszTable::new(grid, mu)?;
    let u: Vec<f64> = grid.nodes().iter().map(|&r| family.u(r)).collect();
    let dens: Vec<f64> = u.iter().map(|v| v.powf(family.q())).collect();
    let d_u = table.double_integral_raw(&dens, &dens);
    let gradsq: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&r| family.u_prime(r).powi(2))
        .collect();
    let grad = weighted_sum(grid, &gradsq);
    Ok(ShlEstimate {
        via_relation: s / c.powf((n - 2.0) / (2.0 * n - mu)),
        via_quotient: grad / d_u.powf((n - 2.0) / (2.0 * n - mu)),
    })
}

/// Critical level c_* = (N+2-μ)/(4N-2μ) · S_HL^{(2N-μ)/(N+2-μ)}.
pub fn critical_level(dim: usize, mu: f64, shl: f64) -> Result<f64> {
    if dim < 3 || !(mu > 0.0 && mu < dim as f64) {
        return Err(CoreError::InvalidParams(format!(
            "invalid (N, mu) = ({dim}, {mu})"
        )));
    }
    if !(shl.is_finite() && shl > 0.0) {
        return Err(CoreError::InvalidParams(format!(
            "S_HL must be positive, got {shl}"
        )));
    }
    let n = dim as f64;
    Ok((n + 2.0 - mu) / (4.0 * n - 2.0 * mu) * shl.powf((2.0 * n - mu) / (n + 2.0 - mu)))
}

/// Every constant of the problem with provenance, computed on one grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantSet {
    pub dim: usize,
    pub mu: f64,
    /// Sharp convolution constant (closed Γ-formula).
    pub c_hls: f64,
    /// Best local constant (Rayleigh quotient of U).
    pub sobolev: f64,
    pub shl_via_relation: f64,
    pub shl_via_quotient: f64,
    pub shl_disagreement_rel: f64,
    /// c_* from the closed form using shl_via_relation.
    pub c_star: f64,
    /// Free energy ½∫|∇Ũ|² - D(Ũ)/(2q) of the normalized minimizer (grid).
    pub c_star_via_energy: f64,
    /// Grid value of ∫|∇Ũ|².
    pub u_tilde_grad_sq: f64,
    /// Grid value of D(Ũ).
    pub u_tilde_nonlocal: f64,
    /// Target for both: S_HL^{(2N-μ)/(N-μ+2)} from the relation value.
    pub u_tilde_norm_target: f64,
    pub grid_nodes: usize,
    pub r_max: f64,
    pub provenance: Vec<String>,
}

impl ConstantSet {
    pub fn compute(dim: usize, mu: f64, nodes: usize, r_max: f64) -> Result<Self> {
        let grid = RadialGrid::standard(dim, r_max, nodes)?;
        let n = dim as f64;
        let c_hls = hls_constant(dim, mu)?;
        let sobolev = sobolev_constant(&grid)?;
        let shl = shl_constant(&grid, mu)?;
        let c_star = critical_level(dim, mu, shl.via_relation)?;

        let family = BubbleFamily::standard(dim, mu)?;
        let factor = family.u_tilde_factor(sobolev, c_hls);
        let q = family.q();
        let table = RadialRieszTable::new(&grid, mu)?;
        let ut: Vec<f64> = grid.nodes().iter().map(|&r| factor * family.u(r)).collect();
        let dens: Vec<f64> = ut.iter().map(|v| v.powf(q)).collect();
        let u_tilde_nonlocal = table.double_integral_raw(&dens, &dens);
        let gradsq: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&r| (factor * family.u_prime(r)).powi(2))
            .collect();
        let u_tilde_grad_sq = weighted_sum(&grid, &gradsq);
        let u_tilde_norm_target = shl
            .via_relation
            .powf((2.0 * n - mu) / (n - mu + 2.0));
        let c_star_via_energy = 0.5 * u_tilde_grad_sq - u_tilde_nonlocal / (2.0 * q);

        Ok(Self {
            dim,
            mu,
            c_hls,
            sobolev,
            shl_via_relation: shl.via_relation,
            shl_via_quotient: shl.via_quotient,
            shl_disagreement_rel: shl.relative_disagreement(),
            c_star,
            c_star_via_energy,
            u_tilde_grad_sq,
            u_tilde_nonlocal,
            u_tilde_norm_target,
            grid_nodes: nodes,
            r_max,
            provenance: vec![
                "c_hls: closed gamma-function formula".into(),
                "sobolev: Rayleigh quotient of the extremal profile on the radial grid".into(),
                "shl_via_relation: sobolev / c_hls^((N-2)/(2N-mu))".into(),
                "shl_via_quotient: gradient/nonlocal quotient of the extremal profile".into(),
                "c_star: closed form from shl_via_relation".into(),
                "c_star_via_energy: free energy of the normalized minimizer on the grid".into(),
            ],
        })
    }

    /// Default desk-scale resolution for constants.
    pub fn standard(dim: usize, mu: f64) -> Result<Self> {
        Self::compute(dim, mu, 20_001, 400.0)
    }
}

/// Relative weighted-L² residual of the normalized minimizer in the limit
/// equation −ΔŨ = (|·|^{-μ} ∗ Ũ^q) Ũ^{q-1}: an end-to-end oracle tying the
/// closed-form constants to the radial convolution machinery.
pub fn u_tilde_residual(grid: &Arc<RadialGrid>, mu: f64) -> Result<f64> {
    let dim = grid.dim();
    let family = BubbleFamily::standard(dim, mu)?;
    let q = family.q();
    let sobolev = sobolev_constant(grid)?;
    let c_hls = hls_constant(dim, mu)?;
    let factor = family.u_tilde_factor(sobolev, c_hls);
    let table = RadialRieszTable::new(grid, mu)?;
    let ut: Vec<f64> = grid.nodes().iter().map(|&r| factor * family.u(r)).collect();
    let dens: Vec<f64> = ut.iter().map(|v| v.powf(q)).collect();
    let phi = table.potential(&dens);
    let mut res = Vec::with_capacity(ut.len());
    let mut lhs = Vec::with_capacity(ut.len());
    for (i, &r) in grid.nodes().iter().enumerate() {
        let neg_lap = -factor * family.u_laplacian(r);
        let rhs = phi[i] * ut[i].powf(q - 1.0);
        res.push((neg_lap - rhs).powi(2));
        lhs.push(neg_lap.powi(2));
    }
    let num = weighted_sum(grid, &res);
    let den = weighted_sum(grid, &lhs);
    Ok((num / den).sqrt())
}

// ─── Small-ε asymptotics ─────────────────────────────────────────────────────

/// One ε row of the bubble table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BubbleRow {
    pub eps: f64,
    /// ∫|∇u_ε|².
    pub grad_sq: f64,
    /// D(u_ε) (NaN when no convolution table was supplied).
    pub nonlocal: f64,
    /// ∫ u_ε².
    pub mass: f64,
    /// Cancellation-free remainder ∫(|∇u_ε|² - |∇U_ε|²): the integrand
    /// vanishes identically on r < δ where ψ ≡ 1, so no large quantities
    /// are subtracted; scales like ε^{N-2}.
    pub grad_remainder: f64,
    /// mass/(ε²|ln ε|) for N = 4, mass/ε² for N ≥ 5; stabilizes to the
    /// positive constant d of the expansion.
    pub mass_normalized: f64,
    /// ε ≤ δ/4 and the grid resolves the core.
    pub reliable: bool,
}

/// Fitted summary of the ε table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BubbleAsymptotics {
    pub rows: Vec<BubbleRow>,
    /// Least-squares slope of ln|grad_remainder| against ln ε over the
    /// (up to) three smallest reliable ε; the expansion predicts N-2.
    pub fitted_grad_exponent: f64,
    /// |ratio - 1| of mass_normalized between the two smallest reliable ε.
    pub mass_ratio_drift: f64,
}

pub fn bubble_asymptotics(
    family: &BubbleFamily,
    grid: &Arc<RadialGrid>,
    table: Option<&RadialRieszTable>,
    eps_list: &[f64],
) -> Result<BubbleAsymptotics> {
    if grid.dim() != family.dim() {
        return Err(CoreError::GridMismatch(
            "grid dimension differs from the bubble family".into(),
        ));
    }
    if eps_list.is_empty() {
        return Err(CoreError::InvalidParams("empty ε list".into()));
    }
    let dim = family.dim();
    let q = family.q();
    let nodes = grid.nodes();
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(CoreError::InvalidParams(format!("ε must be positive, got {eps}")));
        }
        let core_nodes = nodes.iter().take_while(|&&r| r < eps).count();
        let reliable = eps <= family.delta() / 4.0 && core_nodes >= 16;

        let gradsq: Vec<f64> = nodes
            .iter()
            .map(|&r| family.cutoff_bubble_prime(eps, r).powi(2))
            .collect();
        let grad_sq = weighted_sum(grid, &gradsq);

        let remainder_integrand: Vec<f64> = nodes
            .iter()
            .map(|&r| {
                if r < family.delta() {
                    0.0
                } else {
                    family.cutoff_bubble_prime(eps, r).powi(2)
                        - family.u_eps_prime(eps, r).powi(2)
                }
            })
            .collect();
        let grad_remainder = weighted_sum(grid, &remainder_integrand);

        let mass_dens: Vec<f64> = nodes
            .iter()
            .map(|&r| family.cutoff_bubble(eps, r).powi(2))
            .collect();
        let mass = weighted_sum(grid, &mass_dens);
        let mass_normalized = if dim == 4 {
            mass / (eps * eps * eps.ln().abs())
        } else {
            mass / (eps * eps)
        };

        let nonlocal = match table {
            Some(t) => {
                let dens: Vec<f64> = nodes
                    .iter()
                    .map(|&r| family.cutoff_bubble(eps, r).powf(q))
                    .collect();
                t.double_integral_raw(&dens, &dens)
            }
            None => f64::NAN,
        };

        rows.push(BubbleRow {
            eps,
            grad_sq,
            nonlocal,
            mass,
            grad_remainder,
            mass_normalized,
            reliable,
        });
    }

    let mut fit: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.reliable && r.grad_remainder.abs() > 0.0)
        .map(|r| (r.eps.ln(), r.grad_remainder.abs().ln()))
        .collect();
    fit.sort_by(|a, b| a.0.total_cmp(&b.0));
    fit.truncate(3);
    let fitted_grad_exponent = least_squares_slope(&fit);

    let mut small: Vec<&BubbleRow> = rows.iter().filter(|r| r.reliable).collect();
    small.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    let mass_ratio_drift = if small.len() >= 2 {
        (small[0].mass_normalized / small[1].mass_normalized - 1.0).abs()
    } else {
        f64::NAN
    };

    Ok(BubbleAsymptotics {
        rows,
        fitted_grad_exponent,
        mass_ratio_drift,
    })
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return f64::NAN;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hls_constant_matches_hand_evaluated_gamma_values() {
        // N=4, μ=2: π · (Γ(1)/Γ(3)) · (Γ(2)/Γ(4))^{-1/2} = (π/2)√6.
        let got = hls_constant(4, 2.0).unwrap();
        let want = 0.5 * PI * 6.0f64.sqrt();
        assert!(
            (got - want).abs() < 1e-13 * want,
            "C(4,2) = {got}, want (π/2)√6 = {want}"
        );
        assert!(hls_constant(4, 0.0).is_err());
        assert!(hls_constant(4, 4.0).is_err());
        assert!(hls_constant(2, 1.0).is_err());
    }

    #[test]
    fn hls_constant_scan_is_finite_and_increasing() {
        for dim in [3usize, 4, 5] {
            let mut prev = 0.0;
            for k in 0..=40 {
                let mu = 0.1 + k as f64 * (0.9 * dim as f64 - 0.1) / 40.0;
                let c = hls_constant(dim, mu).unwrap();
                assert!(c.is_finite() && c > 0.0, "C({dim},{mu}) = {c}");
                assert!(c > prev, "scan must increase: C({dim},{mu}) = {c} ≤ {prev}");
                prev = c;
            }
        }
    }

    #[test]
    fn sobolev_quotient_is_dilation_and_scaling_invariant() {
        // Far tail must be captured for the quotients to agree: the graded
        // grid spends half its nodes below r ≈ 1 regardless of r_max.
        let grid = RadialGrid::standard(4, 2000.0, 20_001).unwrap();
        let s = sobolev_constant(&grid).unwrap();
        let family = BubbleFamily::standard(4, 2.0).unwrap();
        let s_dilated = rayleigh_quotient_local(
            &grid,
            |r| family.u_eps(0.5, r),
            |r| family.u_eps_prime(0.5, r),
        );
        assert!(
            (s_dilated - s).abs() < 1e-6 * s,
            "dilation invariance: {s_dilated} vs {s}"
        );
        let s_scaled =
            rayleigh_quotient_local(&grid, |r| 3.0 * family.u(r), |r| 3.0 * family.u_prime(r));
        assert!(
            (s_scaled - s).abs() < 1e-11 * s,
            "homogeneity: {s_scaled} vs {s}"
        );
    }

    #[test]
    fn sobolev_quotient_is_stable_under_refinement() {
        let coarse = sobolev_constant(&RadialGrid::standard(4, 400.0, 10_001).unwrap()).unwrap();
        let fine = sobolev_constant(&RadialGrid::standard(4, 400.0, 40_001).unwrap()).unwrap();
        assert!(
            (coarse - fine).abs() < 1e-5 * fine,
            "refinement drift: {coarse} vs {fine}"
        );
    }

    #[test]
    fn shl_relation_and_quotient_agree() {
        let grid = RadialGrid::standard(4, 300.0, 12_001).unwrap();
        let shl = shl_constant(&grid, 2.0).unwrap();
        assert!(
            shl.relative_disagreement() < 1e-3,
            "S_HL via relation {} vs quotient {}",
            shl.via_relation,
            shl.via_quotient
        );
        // Quotient is dilation-invariant: recompute with U_ε, ε = 0.5.
        let family = BubbleFamily::standard(4, 2.0).unwrap();
        let table = RadialRieszTable::new(&grid, 2.0).unwrap();
        let q = family.q();
        let dens: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&r| family.u_eps(0.5, r).powf(q))
            .collect();
        let d = table.double_integral_raw(&dens, &dens);
        let gradsq: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&r| family.u_eps_prime(0.5, r).powi(2))
            .collect();
        let quot = weighted_sum(&grid, &gradsq) / d.powf(2.0 / 6.0);
        assert!(
            (quot - shl.via_quotient).abs() < 2e-3 * shl.via_quotient,
            "dilated quotient {quot} vs {}",
            shl.via_quotient
        );
    }

    #[test]
    fn normalized_minimizer_attains_the_norm_target() {
        let set = ConstantSet::compute(4, 2.0, 12_001, 300.0).unwrap();
        // ∫|∇Ũ|² = D(Ũ) = S_HL^{(2N-μ)/(N-μ+2)}, all to 1e-3 relative.
        let t = set.u_tilde_norm_target;
        assert!(
            (set.u_tilde_grad_sq - t).abs() < 1e-3 * t,
            "∫|∇Ũ|² = {} vs target {t}",
            set.u_tilde_grad_sq
        );
        assert!(
            (set.u_tilde_nonlocal - t).abs() < 3e-3 * t,
            "D(Ũ) = {} vs target {t}",
            set.u_tilde_nonlocal
        );
    }

    #[test]
    fn critical_level_exponent_arithmetic_and_energy_identity() {
        let set = ConstantSet::compute(4, 2.0, 12_001, 300.0).unwrap();
        // (2N-μ)/(N+2-μ) = 3/2 and the coefficient is 1/3 at (4, 2).
        let want = set.shl_via_relation.powf(1.5) / 3.0;
        assert!(
            (set.c_star - want).abs() < 1e-12 * want,
            "c_* = {} vs (1/3) S_HL^{{3/2}} = {want}",
            set.c_star
        );
        assert!(set.c_star > 0.0);
        // c_* equals the free energy of Ũ.
        assert!(
            (set.c_star_via_energy - set.c_star).abs() < 1e-3 * set.c_star,
            "energy {} vs closed form {}",
            set.c_star_via_energy,
            set.c_star
        );
    }

    #[test]
    fn normalized_minimizer_solves_the_limit_equation() {
        let grid = RadialGrid::standard(4, 300.0, 8001).unwrap();
        let res = u_tilde_residual(&grid, 2.0).unwrap();
        assert!(res < 1e-2, "relative residual {res} too large");
    }

    #[test]
    fn bubble_gradient_remainder_scales_like_eps_to_n_minus_2() {
        let family = BubbleFamily::standard(4, 2.0).unwrap();
        let grid = RadialGrid::standard(4, 40.0, 12_001).unwrap();
        let table = RadialRieszTable::new(&grid, 2.0).unwrap();
        let out =
            bubble_asymptotics(&family, &grid, Some(&table), &[0.1, 0.05, 0.025]).unwrap();
        assert!(
            (1.5..=2.5).contains(&out.fitted_grad_exponent),
            "fitted exponent {} outside [1.5, 2.5]",
            out.fitted_grad_exponent
        );
        for row in &out.rows {
            assert!(row.reliable, "ε = {} should be resolved", row.eps);
            assert!(row.grad_sq > 0.0 && row.mass > 0.0 && row.nonlocal > 0.0);
        }
        // N = 4: mass/(ε²|ln ε|) stabilizes.
        assert!(
            out.mass_ratio_drift < 0.10,
            "mass ratio drift {} ≥ 10%",
            out.mass_ratio_drift
        );
    }

    #[test]
    fn bubble_mass_stabilizes_for_n_five() {
        let family = BubbleFamily::standard(5, 1.0).unwrap();
        let grid = RadialGrid::standard(5, 40.0, 12_001).unwrap();
        let out = bubble_asymptotics(&family, &grid, None, &[0.1, 0.05, 0.025]).unwrap();
        assert!(
            out.mass_ratio_drift < 0.10,
            "mass/ε² drift {} ≥ 10%",
            out.mass_ratio_drift
        );
        assert!(out.rows.iter().all(|r| r.nonlocal.is_nan()));
    }

    #[test]
    fn unscaled_eps_rows_are_flagged_unreliable() {
        let family = BubbleFamily::standard(4, 2.0).unwrap();
        let grid = RadialGrid::standard(4, 40.0, 2001).unwrap();
        let out = bubble_asymptotics(&family, &grid, None, &[1.0, 0.05]).unwrap();
        assert!(!out.rows[0].reliable, "ε = δ must be flagged");
        assert!(out.rows[1].reliable);
        assert!(bubble_asymptotics(&family, &grid, None, &[]).is_err());
        assert!(bubble_asymptotics(&family, &grid, None, &[-0.1]).is_err());
    }

    #[test]
    fn cutoff_bubble_geometry() {
        let family = BubbleFamily::standard(4, 2.0).unwrap();
        assert_eq!(family.psi(0.5), 1.0, "plateau");
        assert_eq!(family.psi(2.5), 0.0, "tail");
        assert_eq!(family.cutoff_bubble(0.1, 3.0), 0.0);
        // u_ε = U_ε inside the plateau.
        let r = 0.7;
        assert_eq!(family.cutoff_bubble(0.1, r), family.u_eps(0.1, r));
        // U(0) = [N(N-2)]^{(N-2)/4} = 8^{1/2} for N = 4.
        assert!((family.u(0.0) - 8.0f64.sqrt()).abs() < 1e-14);
        // Analytic derivative of u_ε matches finite differences on the ramp.
        let h = 1e-6;
        for &r in &[1.3, 1.7, 0.9, 2.1] {
            let fd = (family.cutoff_bubble(0.05, r + h) - family.cutoff_bubble(0.05, r - h))
                / (2.0 * h);
            let an = family.cutoff_bubble_prime(0.05, r);
            assert!(
                (fd - an).abs() < 1e-5 * an.abs().max(1.0),
                "r={r}: fd {fd} vs analytic {an}"
            );
        }
    }
}
