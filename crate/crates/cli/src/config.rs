//! Run configuration.
//!
//! One TOML file describes an entire run: the problem parameters, the
//! potential well, the tensor grid, solver tolerances, sweep lists and the
//! output policy. Command-line flags override individual values. The fully
//! resolved configuration is serialized back into every report, and its
//! SHA-256 hash is embedded in every output file, so a run is reproducible
//! from any one of its artifacts.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use choquard::{Potential, ProblemParams, TensorGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// `[problem]` — dimension, kernel exponent, penalization and shift.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    /// Space dimension N ≥ 3.
    pub dim: usize,
    /// Riesz kernel exponent μ ∈ (0, min(4, N)).
    pub mu: f64,
    /// Penalization strength λ ≥ 0.
    pub lambda: f64,
    /// Absolute spectral shift β ≥ 0 (mutually exclusive with
    /// `beta_factor`).
    pub beta: Option<f64>,
    /// Shift as a multiple of the first Dirichlet eigenvalue β₁ of the
    /// well; resolved after the eigenvalue is computed. When neither `beta`
    /// nor `beta_factor` is given, `beta_factor = 0.5` is assumed.
    pub beta_factor: Option<f64>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            dim: 4,
            mu: 2.0,
            lambda: 1e4,
            beta: None,
            beta_factor: None,
        }
    }
}

/// `[potential]` — geometry of the well Ω = {V = 0}.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSection {
    /// One of `"ball"`, `"box"`, `"annulus"`, `"ramp"`.
    pub kind: String,
    /// Well radius (ball and ramp wells).
    pub radius: f64,
    /// Well half-width (box wells).
    pub half_width: f64,
    /// Inner radius (annulus wells).
    pub inner: f64,
    /// Outer radius (annulus wells).
    pub outer: f64,
    /// Length scale of the ramp from 0 up to the plateau.
    pub ramp_width: Option<f64>,
    /// Level used by the finite-sublevel-set check.
    pub m0: Option<f64>,
    /// Plateau height of bounded wells.
    pub height_cap: Option<f64>,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self {
            kind: "ball".into(),
            radius: 1.0,
            half_width: 1.0,
            inner: 0.7,
            outer: 1.9,
            ramp_width: None,
            m0: None,
            height_cap: None,
        }
    }
}

impl PotentialSection {
    pub fn build(&self) -> CliResult<Potential> {
        let mut p = match self.kind.as_str() {
            "ball" | "ball_well" => Potential::ball_well(self.radius),
            "box" | "box_well" => Potential::box_well(self.half_width),
            "annulus" | "annulus_well" => Potential::annulus_well(self.inner, self.outer),
            "ramp" | "smooth_ramp" | "smooth_ramp_well" => {
                Potential::smooth_ramp_well(self.radius)
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown well kind {other:?}; expected ball, box, annulus or ramp"
                )))
            }
        }?;
        if let Some(w) = self.ramp_width {
            p.ramp_width = w;
        }
        if let Some(m) = self.m0 {
            p.m0 = m;
        }
        if let Some(h) = self.height_cap {
            p.height_cap = h;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn is_annulus(&self) -> bool {
        matches!(self.kind.as_str(), "annulus" | "annulus_well")
    }
}

/// `[grid]` — the periodic tensor grid carrying the fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Points per axis.
    pub n: usize,
    /// Box half-width L (the grid covers [−L, L)^N).
    pub half_width: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n: 32,
            half_width: 3.0,
        }
    }
}

impl GridSection {
    pub fn build(&self, dim: usize) -> CliResult<Arc<TensorGrid>> {
        Ok(TensorGrid::new(dim, self.n, self.half_width)?)
    }
}

/// `[solver]` — descent tolerances and the optional seeded perturbation of
/// the initial guess.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Relative gradient tolerance of the descent.
    pub grad_tol: f64,
    /// Iteration budget.
    pub max_iters: usize,
    /// When set, adds a 1%-relative smooth random perturbation (seeded, so
    /// runs stay reproducible) to every initial guess.
    pub init_seed: Option<u64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            max_iters: 2000,
            init_seed: None,
        }
    }
}

/// `[output]` — where artifacts go and whether field snapshots are written.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Directory for reports, tables and snapshots (created on demand).
    pub dir: String,
    /// Write binary field snapshots next to the JSON reports.
    pub snapshots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "choquard-out".into(),
            snapshots: true,
        }
    }
}

/// `[sweep]` — parameter lists for the sweep commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Strictly increasing λ values spanning at least two decades.
    pub lambdas: Vec<f64>,
    /// Strictly decreasing multiples of β₁ in (0, 1).
    pub beta_factors: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            lambdas: vec![1e2, 1e3, 1e4],
            beta_factors: vec![0.3, 0.1, 0.03],
        }
    }
}

/// `[eigs]` — eigenvalue-table settings (also the splitting size used by
/// the indefinite solver).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigsSection {
    /// Number of eigenpairs per λ.
    pub count: usize,
}

impl Default for EigsSection {
    fn default() -> Self {
        Self { count: 4 }
    }
}

/// `[multistart]` — seed geometry for the multiplicity search. Every field
/// defaults to a value derived from the well geometry when absent.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct MultistartSection {
    /// Number of seeds.
    pub seeds: Option<usize>,
    /// Ring radius for annulus-well seeds.
    pub ring_radius: Option<f64>,
    /// Cutoff radius of the seed bubbles.
    pub delta: Option<f64>,
    /// Concentration scale of the seed bubbles.
    pub eps: Option<f64>,
    /// Barycenter distance under which two solutions count as one.
    pub cluster_radius: Option<f64>,
    /// Maximal admissible barycenter distance to the well.
    pub neighborhood: Option<f64>,
}

/// `[radial]` — the graded radial grid used by the constants and bubble
/// commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadialSection {
    /// Radial node count.
    pub nodes: usize,
    /// Radial extent.
    pub r_max: f64,
    /// Concentration scales ε for the bubble-asymptotics table.
    pub eps: Vec<f64>,
    /// Cutoff radius δ of the truncated bubbles.
    pub delta: f64,
}

impl Default for RadialSection {
    fn default() -> Self {
        Self {
            nodes: 20_001,
            r_max: 400.0,
            eps: vec![0.4, 0.2, 0.1, 0.05, 0.025],
            delta: 1.0,
        }
    }
}

/// The complete, self-describing configuration of one run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub potential: PotentialSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub output: OutputSection,
    pub sweep: SweepSection,
    pub eigs: EigsSection,
    pub multistart: MultistartSection,
    pub radial: RadialSection,
}

impl RunConfig {
    /// Load a configuration file, or start from the defaults when no file
    /// is given. A missing or malformed file is a configuration error; no
    /// outputs are produced in that case.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
        if cfg.problem.beta.is_some() && cfg.problem.beta_factor.is_some() {
            return Err(CliError::Config(
                "set either problem.beta or problem.beta_factor, not both".into(),
            ));
        }
        Ok(cfg)
    }

    /// SHA-256 hash of the resolved configuration (hex), embedded in every
    /// output file.
    pub fn sha256(&self) -> String {
        let canonical =
            serde_json::to_string(self).expect("RunConfig serialization cannot fail");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    /// Problem parameters with the given resolved shift.
    pub fn params(&self, beta: f64) -> CliResult<ProblemParams> {
        Ok(ProblemParams::new(
            self.problem.dim,
            self.problem.mu,
            self.problem.lambda,
            beta,
        )?)
    }

    /// The shift prescription: `Ok(beta)` for an absolute value, or
    /// `Err(factor)` when it is a multiple of β₁ still to be resolved.
    pub fn beta_rule(&self) -> Result<f64, f64> {
        match (self.problem.beta, self.problem.beta_factor) {
            (Some(b), _) => Ok(b),
            (None, Some(f)) => Err(f),
            (None, None) => Err(0.5),
        }
    }
}
