//! `choquard` — ground states of the critical Choquard equation
//!
//!     -Δu + (λV(x) - β)u = (|x|^{-μ} ∗ |u|^{2μ#})|u|^{2μ# - 2}u,  x ∈ ℝ^N,
//!
//! with a steep potential well λV. The tool computes sharp constants,
//! bubble asymptotics, ground states in the definite and indefinite
//! regimes, penalization and shift sweeps, spectral tables and multistart
//! multiplicity searches, and verifies the quantitative claims attached to
//! each of them.
//!
//! Exit codes: 0 success; 1 a scientific check failed; 2 bad invocation or
//! configuration; 3 the numerics diverged or ran out of budget.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::{CliError, CliResult};
use output::CmdOutcome;

#[derive(Parser)]
#[command(
    name = "choquard",
    version,
    about = "Numerical laboratory for the critical Choquard equation with a steep potential well",
    after_help = "Exit codes: 0 success, 1 scientific check failed, 2 bad invocation or \
                  configuration, 3 numerical divergence.\n\
                  Set CHOQUARD_CACHE_DIR to choose where kernel tables are cached."
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

// ─── Override flags (flags win over the config file) ─────────────────────────

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory for reports, tables and snapshots.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Skip writing binary field snapshots.
    #[arg(long)]
    no_snapshots: bool,
}

impl ConfigArgs {
    fn load(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(out) = &self.out {
            cfg.output.dir = out.display().to_string();
        }
        if self.no_snapshots {
            cfg.output.snapshots = false;
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug, Default)]
struct ProblemArgs {
    /// Space dimension N.
    #[arg(long = "N", value_name = "DIM")]
    dim: Option<usize>,
    /// Riesz kernel exponent μ.
    #[arg(long)]
    mu: Option<f64>,
    /// Penalization strength λ.
    #[arg(long)]
    lambda: Option<f64>,
    /// Spectral shift β (absolute).
    #[arg(long, conflicts_with = "beta_factor")]
    beta: Option<f64>,
    /// Spectral shift as a multiple of the first Dirichlet eigenvalue β₁.
    #[arg(long)]
    beta_factor: Option<f64>,
}

impl ProblemArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(d) = self.dim {
            cfg.problem.dim = d;
        }
        if let Some(m) = self.mu {
            cfg.problem.mu = m;
        }
        if let Some(l) = self.lambda {
            cfg.problem.lambda = l;
        }
        if let Some(b) = self.beta {
            cfg.problem.beta = Some(b);
            cfg.problem.beta_factor = None;
        }
        if let Some(f) = self.beta_factor {
            cfg.problem.beta_factor = Some(f);
            cfg.problem.beta = None;
        }
    }
}

#[derive(Args, Debug, Default)]
struct GridArgs {
    /// Tensor-grid points per axis.
    #[arg(long)]
    n: Option<usize>,
    /// Tensor-grid box half-width L.
    #[arg(long)]
    half_width: Option<f64>,
}

impl GridArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(n) = self.n {
            cfg.grid.n = n;
        }
        if let Some(l) = self.half_width {
            cfg.grid.half_width = l;
        }
    }
}

#[derive(Args, Debug, Default)]
struct SolverArgs {
    /// Relative gradient tolerance of the descent.
    #[arg(long)]
    grad_tol: Option<f64>,
    /// Descent iteration budget.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Seed for the optional 1% perturbation of initial guesses.
    #[arg(long)]
    init_seed: Option<u64>,
}

impl SolverArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(t) = self.grad_tol {
            cfg.solver.grad_tol = t;
        }
        if let Some(m) = self.max_iters {
            cfg.solver.max_iters = m;
        }
        if let Some(s) = self.init_seed {
            cfg.solver.init_seed = Some(s);
        }
    }
}

#[derive(Args, Debug, Default)]
struct WellArgs {
    /// Well kind: ball, box, annulus or ramp.
    #[arg(long, value_name = "KIND")]
    well: Option<String>,
    /// Well radius (ball and ramp wells).
    #[arg(long)]
    well_radius: Option<f64>,
    /// Well half-width (box wells).
    #[arg(long)]
    well_half_width: Option<f64>,
    /// Inner radius (annulus wells).
    #[arg(long)]
    well_inner: Option<f64>,
    /// Outer radius (annulus wells).
    #[arg(long)]
    well_outer: Option<f64>,
}

impl WellArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(k) = &self.well {
            cfg.potential.kind = k.clone();
        }
        if let Some(r) = self.well_radius {
            cfg.potential.radius = r;
        }
        if let Some(w) = self.well_half_width {
            cfg.potential.half_width = w;
        }
        if let Some(i) = self.well_inner {
            cfg.potential.inner = i;
        }
        if let Some(o) = self.well_outer {
            cfg.potential.outer = o;
        }
    }
}

#[derive(Args, Debug, Default)]
struct RadialArgs {
    /// Radial grid node count (constants and bubble tables).
    #[arg(long)]
    nodes: Option<usize>,
    /// Radial grid extent.
    #[arg(long)]
    r_max: Option<f64>,
}

impl RadialArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(n) = self.nodes {
            cfg.radial.nodes = n;
        }
        if let Some(r) = self.r_max {
            cfg.radial.r_max = r;
        }
    }
}

// ─── Subcommands ─────────────────────────────────────────────────────────────

#[derive(Subcommand)]
enum Cmd {
    /// Sharp constants for (N, μ): C(N,μ), S, the nonlocal best constant by
    /// two independent routes, and the critical level.
    Constants {
        #[command(flatten)]
        common: ConfigArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        radial: RadialArgs,
    },
    /// Truncated-bubble energy asymptotics over a list of scales ε.
    Bubbles {
        #[command(flatten)]
        common: ConfigArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        radial: RadialArgs,
        /// Comma-separated concentration scales ε.
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        eps: Option<Vec<f64>>,
    },
    /// Ground state of the penalized problem (definite regime β < β₁).
    Groundstate {
        #[command(flatten)]
        common: ConfigArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        well: WellArgs,
        /// Solve the Dirichlet problem on the well bottom instead.
        #[arg(long)]
        limit: bool,
    },
    /// Ground states along increasing λ with concentration verdicts.
    SweepLambda {
        #[command(flatten)]
        common: ConfigArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        well: WellArgs,
        /// Comma-separated, strictly increasing λ values.
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        lambdas: Option<Vec<f64>>,
    },
    /// Dirichlet-well ground states along decreasing β with the gap to the
    /// critical level.
    SweepBeta {
        #[command(flatten)]
        common: ConfigArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        well: WellArgs,
        #[command(flatten)]
        radial: RadialArgs,
        /// Comma-separated, strictly decreasing multiples of β₁ in (0, 1).
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        beta_factors: Option<Vec<f64>>,
    },
    /// Low Schrödinger eigenvalues against their Dirichlet limits for each λ.
    Eigs {
        #[command(flatten)]
        common: ConfigArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        well: WellArgs,
        /// Comma-separated, strictly increasing λ values.
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        lambdas: Option<Vec<f64>>,
        /// Number of eigenpairs per λ.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Ground state in the indefinite regime β > β₁ (negative-subspace
    /// reduction with maximizer cross-checks).
    Indefinite {
        #[command(flatten)]
        common: ConfigArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        well: WellArgs,
        /// Size of the spectral splitting.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Multistart search for distinct localized solutions.
    Multiplicity {
        #[command(flatten)]
        common: ConfigArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        well: WellArgs,
        /// Number of seeds.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Check a configuration without solving: parameter domain, potential
    /// sampling, well resolution.
    Validate {
        #[command(flatten)]
        common: ConfigArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        well: WellArgs,
    },
}

fn dispatch(cmd: Cmd) -> CliResult<CmdOutcome> {
    match cmd {
        Cmd::Constants {
            common,
            problem,
            radial,
        } => {
            let mut cfg = common.load()?;
            problem.apply(&mut cfg);
            radial.apply(&mut cfg);
            commands::constants(&cfg)
        }
        Cmd::Bubbles {
            common,
            problem,
            radial,
            eps,
        } => {
            let mut cfg = common.load()?;
            problem.apply(&mut cfg);
            radial.apply(&mut cfg);
            if let Some(eps) = eps {
                cfg.radial.eps = eps;
            }
            commands::bubbles(&cfg)
        }
        Cmd::Groundstate {
            common,
            problem,
            grid,
            solver,
            well,
            limit,
        } => {
            let mut cfg = common.load()?;
            problem.apply(&mut cfg);
            grid.apply(&mut cfg);
            solver.apply(&mut cfg);
            well.apply(&mut cfg);
            commands::groundstate(&cfg, limit)
        }
        Cmd::SweepLambda {
            common,
            problem,
            grid,
            solver,
            well,
            lambdas,
        } => {
            let mut cfg = common.load()?;
            problem.apply(&mut cfg);
            grid.apply(&mut cfg);
            solver.apply(&mut cfg);
            well.apply(&mut cfg);
            if let Some(l) = lambdas {
                cfg.sweep.lambdas = l;
            }
            commands::sweep_lambda(&cfg)
        }
        Cmd::SweepBeta {
            common,
            problem,
            grid,
            solver,
            well,
            radial,
            beta_factors,
        } => {
            let mut cfg = common.load()?;
            problem.apply(&mut cfg);
            grid.apply(&mut cfg);
            solver.apply(&mut cfg);
            well.apply(&mut cfg);
            radial.apply(&mut cfg);
            if let Some(f) = beta_factors {
                cfg.sweep.beta_factors = f;
            }
            commands::sweep_beta(&cfg)
        }
        Cmd::Eigs {
            common,
            problem,
            grid,
            well,
            lambdas,
            count,
        } => {
            let mut cfg = common.load()?;
            problem.apply(&mut cfg);
            grid.apply(&mut cfg);
            well.apply(&mut cfg);
            if let Some(l) = lambdas {
                cfg.sweep.lambdas = l;
            }
            if let Some(k) = count {
                cfg.eigs.count = k;
            }
            commands::eigs(&cfg)
        }
        Cmd::Indefinite {
            common,
            problem,
            grid,
            solver,
            well,
            count,
        } => {
            let mut cfg = common.load()?;
            problem.apply(&mut cfg);
            grid.apply(&mut cfg);
            solver.apply(&mut cfg);
            well.apply(&mut cfg);
            if let Some(k) = count {
                cfg.eigs.count = k;
            }
            commands::indefinite(&cfg)
        }
        Cmd::Multiplicity {
            common,
            problem,
            grid,
            solver,
            well,
            seeds,
        } => {
            let mut cfg = common.load()?;
            problem.apply(&mut cfg);
            grid.apply(&mut cfg);
            solver.apply(&mut cfg);
            well.apply(&mut cfg);
            if let Some(s) = seeds {
                cfg.multistart.seeds = Some(s);
            }
            commands::multiplicity(&cfg)
        }
        Cmd::Validate {
            common,
            problem,
            grid,
            well,
        } => {
            let mut cfg = common.load()?;
            problem.apply(&mut cfg);
            grid.apply(&mut cfg);
            well.apply(&mut cfg);
            commands::validate(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(out) => {
            print!("{}", out.stdout);
            if let Some(msg) = out.numerics_failure {
                let e = CliError::Numerics(msg);
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code())
            } else if !out.failed_checks.is_empty() {
                let e = CliError::Science(out.failed_checks.join(", "));
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code())
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
