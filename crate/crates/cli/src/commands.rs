//! The nine operations of the command-line laboratory.
//!
//! Every command resolves its configuration, runs the corresponding library
//! routine, writes its artifacts (JSON report, CSV table, field snapshots)
//! and returns the scientific-check verdicts to `main` for exit-code
//! selection. Artifacts are written even when a check fails, so a failing
//! run can be inspected.

use std::sync::Arc;

use choquard::bubbles::{
    bubble_asymptotics, critical_level, shl_constant, BubbleFamily, ConstantSet,
};
use choquard::functional::EnergyBreakdown;
use choquard::riesz::{RadialRieszTable, RieszOperator};
use choquard::solver::{
    beta_sweep, default_bubble_init, ground_state_definite, ground_state_indefinite,
    ground_state_limit_problem, lambda_sweep, mask_barycenter, mask_inradius_estimate,
    multistart_multiplicity, ring_bubble_seeds,
};
use choquard::spectra::{degeneracy_margin, dirichlet_eigs, schrodinger_eigs};
use choquard::{
    DomainMask, LambdaSweepRow, Potential, ProblemParams, RadialGrid, SolveOptions, SolveResult,
    TensorField, TensorGrid,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{num, Check, CmdOutcome, Emitter};

// ─── Shared setup ────────────────────────────────────────────────────────────

/// Grid, potential, mask, convolution operator and resolved shift — the
/// state every tensor-grid command starts from.
struct Setup {
    grid: Arc<TensorGrid>,
    potential: Potential,
    v: TensorField,
    mask: DomainMask,
    op: RieszOperator,
    beta: f64,
    beta1: f64,
    params: ProblemParams,
    opts: SolveOptions,
}

fn tensor_setup(cfg: &RunConfig) -> CliResult<Setup> {
    let grid = cfg.grid.build(cfg.problem.dim)?;
    let potential = cfg.potential.build()?;
    let v = potential.sample_tensor(&grid);
    let mask = DomainMask::from_potential_well(&v)?;
    let op = RieszOperator::new(&grid, cfg.problem.mu)?;
    let beta1 = dirichlet_eigs(&mask, 1)?.values[0];
    let beta = match cfg.beta_rule() {
        Ok(absolute) => absolute,
        Err(factor) => factor * beta1,
    };
    let params = cfg.params(beta)?;
    let opts = SolveOptions {
        grad_tol: cfg.solver.grad_tol,
        max_iters: cfg.solver.max_iters,
        known_beta1: Some(beta1),
    };
    Ok(Setup {
        grid,
        potential,
        v,
        mask,
        op,
        beta,
        beta1,
        params,
        opts,
    })
}

/// A point inside the well to center initial bubbles at: the well
/// barycenter, or — for non-convex wells such as annuli, whose barycenter
/// falls outside — the inside cell center nearest to it.
fn well_anchor(potential: &Potential, mask: &DomainMask) -> Vec<f64> {
    let c = mask_barycenter(mask);
    if potential.in_well(&c) {
        return c;
    }
    let grid = mask.grid();
    let (dim, n) = (grid.dim(), grid.n());
    let mut best = (f64::INFINITY, c.clone());
    for (flat, &ins) in mask.inside().iter().enumerate() {
        if !ins {
            continue;
        }
        let mut rest = flat;
        let mut x = vec![0.0; dim];
        let mut d2 = 0.0;
        for a in (0..dim).rev() {
            let idx = rest % n;
            rest /= n;
            x[a] = grid.coord(idx);
            let dx = x[a] - c[a];
            d2 += dx * dx;
        }
        if d2 < best.0 {
            best = (d2, x);
        }
    }
    best.1
}

fn grid_spacing(grid: &TensorGrid) -> f64 {
    2.0 * grid.half_width() / grid.n() as f64
}

/// Cutoff bubble sized to the well, optionally perturbed by a seeded smooth
/// random field (1% relative) so descent robustness can be probed without
/// losing reproducibility.
fn initial_guess(cfg: &RunConfig, s: &Setup) -> CliResult<TensorField> {
    let anchor = well_anchor(&s.potential, &s.mask);
    let radius =
        mask_inradius_estimate(&s.mask, &anchor).max(3.0 * grid_spacing(&s.grid));
    let mut init = default_bubble_init(&s.grid, cfg.problem.mu, &anchor, radius)?;
    if let Some(seed) = cfg.solver.init_seed {
        let noise = TensorField::random_smooth(Arc::clone(&s.grid), seed, 0.25);
        init = init.add_scaled(&noise, 0.01 * init.l2_norm());
    }
    Ok(init)
}

// ─── Solve summaries ─────────────────────────────────────────────────────────

/// Serializable projection of a [`SolveResult`] (the field itself goes into
/// a snapshot, not the report).
#[derive(Serialize)]
struct SolveSummary {
    problem: String,
    lambda: f64,
    beta: f64,
    beta1: f64,
    beta_over_beta1: f64,
    level: f64,
    energy: EnergyBreakdown,
    nehari_residual: f64,
    grad_norm: f64,
    grad_rel: f64,
    reprojection_error: f64,
    pohozaev_residual: Option<f64>,
    barycenter: Vec<f64>,
    truncated_barycenter: Vec<f64>,
    outside_mass_fraction: Option<f64>,
    ps_ratio: f64,
    iterations: usize,
    converged: bool,
}

fn solve_summary(kind: &str, s: &Setup, r: &SolveResult) -> SolveSummary {
    SolveSummary {
        problem: kind.into(),
        lambda: s.params.lambda,
        beta: s.beta,
        beta1: s.beta1,
        beta_over_beta1: s.beta / s.beta1,
        level: r.level,
        energy: r.energy,
        nehari_residual: r.nehari_residual,
        grad_norm: r.grad_norm,
        grad_rel: r.grad_rel,
        reprojection_error: r.reprojection_error,
        pohozaev_residual: r.pohozaev_residual,
        barycenter: r.barycenter.clone(),
        truncated_barycenter: r.truncated_barycenter.clone(),
        outside_mass_fraction: r.outside_mass_fraction,
        ps_ratio: r.ps_ratio,
        iterations: r.iterations,
        converged: r.converged,
    }
}

/// The certificates every converged constrained descent must satisfy.
fn solve_checks(r: &SolveResult, opts: &SolveOptions) -> Vec<Check> {
    let scale = r.energy.quadratic_form.abs() + r.energy.nonlocal.abs();
    vec![
        Check::holds(
            "gradient_relative_norm",
            r.grad_rel <= opts.grad_tol,
            r.grad_rel,
            opts.grad_tol,
        ),
        Check::below(
            "nehari_residual_relative",
            r.nehari_residual.abs() / scale,
            1e-10,
        ),
        Check::below("level_reprojection_error", r.reprojection_error, 1e-8),
    ]
}

fn convergence_failure(r: &SolveResult, what: &str) -> Option<String> {
    (!r.converged).then(|| {
        format!(
            "{what} stopped unconverged after {} iterations (relative gradient {:.3e})",
            r.iterations, r.grad_rel
        )
    })
}

// ─── constants ───────────────────────────────────────────────────────────────

/// Sharp constants for (N, μ); fails the run when the two independent
/// routes to the nonlocal best constant disagree beyond 1%.
pub fn constants(cfg: &RunConfig) -> CliResult<CmdOutcome> {
    let set = ConstantSet::compute(
        cfg.problem.dim,
        cfg.problem.mu,
        cfg.radial.nodes,
        cfg.radial.r_max,
    )?;
    let em = Emitter::new(cfg);
    let checks = vec![Check::below(
        "shl_route_disagreement",
        set.shl_disagreement_rel,
        1e-2,
    )];
    em.report(cfg, "constants", &set, &checks, None)
}

// ─── bubbles ─────────────────────────────────────────────────────────────────

/// Cutoff-bubble energy table over the configured concentration scales ε,
/// with the fitted gradient-remainder exponent and the mass-scaling drift.
pub fn bubbles(cfg: &RunConfig) -> CliResult<CmdOutcome> {
    let dim = cfg.problem.dim;
    let family = BubbleFamily::new(dim, cfg.problem.mu, cfg.radial.delta)?;
    let rgrid = RadialGrid::standard(dim, cfg.radial.r_max, cfg.radial.nodes)?;
    let table = RadialRieszTable::new(&rgrid, cfg.problem.mu)?;
    let asym = bubble_asymptotics(&family, &rgrid, Some(&table), &cfg.radial.eps)?;

    let em = Emitter::new(cfg);
    let rows: Vec<Vec<String>> = asym
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.eps),
                num(r.grad_sq),
                num(r.nonlocal),
                num(r.mass),
                num(r.grad_remainder),
                num(r.mass_normalized),
                r.reliable.to_string(),
            ]
        })
        .collect();
    em.csv(
        "bubbles",
        "eps,grad_sq,nonlocal,mass,grad_remainder,mass_normalized,reliable",
        &rows,
    )?;

    let target = (dim - 2) as f64;
    let checks = vec![
        Check::holds(
            "grad_remainder_exponent_near_target",
            (asym.fitted_grad_exponent - target).abs() <= 0.5,
            asym.fitted_grad_exponent,
            target,
        ),
        Check::below("mass_scaling_drift", asym.mass_ratio_drift, 0.10),
    ];
    em.report(cfg, "bubbles", &asym, &checks, None)
}

// ─── groundstate ─────────────────────────────────────────────────────────────

/// Ground state of the penalized problem (or, with `limit`, of the
/// Dirichlet problem on the well bottom).
pub fn groundstate(cfg: &RunConfig, limit: bool) -> CliResult<CmdOutcome> {
    let s = tensor_setup(cfg)?;
    let init = initial_guess(cfg, &s)?;
    let (kind, result) = if limit {
        (
            "dirichlet_limit",
            ground_state_limit_problem(&s.params, &s.mask, &init, &s.op, &s.opts)?,
        )
    } else {
        (
            "penalized",
            ground_state_definite(&s.params, &s.v, &init, &s.op, &s.opts)?,
        )
    };
    let em = Emitter::new(cfg);
    em.snapshot("groundstate_field", "groundstate", &result.field)?;
    let summary = solve_summary(kind, &s, &result);
    let checks = solve_checks(&result, &s.opts);
    let numerics = convergence_failure(&result, "ground-state descent");
    em.report(cfg, "groundstate", &summary, &checks, numerics)
}

// ─── sweep-lambda ────────────────────────────────────────────────────────────

/// Ground states along increasing λ, with the concentration verdicts
/// against the Dirichlet limit problem.
pub fn sweep_lambda(cfg: &RunConfig) -> CliResult<CmdOutcome> {
    let s = tensor_setup(cfg)?;
    let sweep = lambda_sweep(&s.params, &s.v, &cfg.sweep.lambdas, &s.op, &s.opts)?;
    let em = Emitter::new(cfg);

    let mut rows = Vec::new();
    let mut monotone = true;
    for (i, row) in sweep.rows.iter().enumerate() {
        if i > 0 {
            let prev = &sweep.rows[i - 1];
            monotone = monotone
                && row.outside_mass_fraction < prev.outside_mass_fraction
                && row.h1_distance < prev.h1_distance
                && row.level >= prev.level;
        }
        rows.push(vec![
            num(row.lambda),
            num(row.level),
            num(row.outside_mass_fraction),
            num(row.potential_integral),
            num(row.h1_distance),
            row.iterations.to_string(),
            row.converged.to_string(),
            monotone.to_string(),
        ]);
    }
    em.csv(
        "sweep_lambda",
        "lambda,level,outside_mass_fraction,potential_integral,h1_distance_to_limit,iterations,converged,monotone_so_far",
        &rows,
    )?;
    em.snapshot("sweep_lambda_limit_field", "sweep-lambda", &sweep.limit.field)?;

    #[derive(Serialize)]
    struct Payload<'a> {
        beta: f64,
        beta1: f64,
        limit_level: f64,
        limit_converged: bool,
        rows: &'a [LambdaSweepRow],
        level_nondecreasing: bool,
        outside_mass_decreasing: bool,
        h1_distance_decreasing: bool,
        levels_below_limit: bool,
    }
    let payload = Payload {
        beta: s.beta,
        beta1: s.beta1,
        limit_level: sweep.limit.level,
        limit_converged: sweep.limit.converged,
        rows: &sweep.rows,
        level_nondecreasing: sweep.level_nondecreasing,
        outside_mass_decreasing: sweep.outside_mass_decreasing,
        h1_distance_decreasing: sweep.h1_distance_decreasing,
        levels_below_limit: sweep.levels_below_limit,
    };

    let last = sweep.rows.last().expect("sweep returns at least two rows");
    let checks = vec![
        Check::holds(
            "levels_nondecreasing_in_lambda",
            sweep.level_nondecreasing,
            last.level,
            sweep.limit.level,
        ),
        Check::holds(
            "outside_mass_decreasing",
            sweep.outside_mass_decreasing,
            last.outside_mass_fraction,
            sweep.rows[0].outside_mass_fraction,
        ),
        Check::holds(
            "h1_distance_to_limit_decreasing",
            sweep.h1_distance_decreasing,
            last.h1_distance,
            sweep.rows[0].h1_distance,
        ),
        Check::holds(
            "levels_below_dirichlet_limit",
            sweep.levels_below_limit,
            last.level,
            sweep.limit.level,
        ),
    ];

    let numerics = sweep
        .rows
        .iter()
        .find(|r| !r.converged)
        .map(|r| {
            format!(
                "sweep row λ = {} stopped unconverged after {} iterations",
                r.lambda, r.iterations
            )
        })
        .or_else(|| convergence_failure(&sweep.limit, "limit-problem descent"));
    em.report(cfg, "sweep_lambda", &payload, &checks, numerics)
}

// ─── sweep-beta ──────────────────────────────────────────────────────────────

/// Dirichlet ground states along decreasing β, with the free-problem
/// projection scale t and the gap to the critical level.
pub fn sweep_beta(cfg: &RunConfig) -> CliResult<CmdOutcome> {
    for &f in &cfg.sweep.beta_factors {
        if !(f > 0.0 && f < 1.0) {
            return Err(CliError::Config(format!(
                "beta factors must lie in (0, 1), got {f}"
            )));
        }
    }
    let s = tensor_setup(cfg)?;
    let betas: Vec<f64> = cfg.sweep.beta_factors.iter().map(|f| f * s.beta1).collect();

    let rgrid = RadialGrid::standard(cfg.problem.dim, cfg.radial.r_max, cfg.radial.nodes)?;
    let shl = shl_constant(&rgrid, cfg.problem.mu)?;
    let c_star = critical_level(cfg.problem.dim, cfg.problem.mu, shl.via_relation)?;

    let sweep = beta_sweep(&s.params, &s.mask, &betas, &s.op, c_star, &s.opts)?;
    let em = Emitter::new(cfg);

    let rows: Vec<Vec<String>> = sweep
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.beta),
                num(r.beta_over_beta1),
                num(r.level),
                num(r.t_star),
                num((r.t_star - 1.0).abs()),
                num(r.cstar_gap),
                r.iterations.to_string(),
                r.converged.to_string(),
            ]
        })
        .collect();
    em.csv(
        "sweep_beta",
        "beta,beta_over_beta1,level,t_star,t_gap,cstar_gap,iterations,converged",
        &rows,
    )?;

    #[derive(Serialize)]
    struct Payload<'a> {
        beta1: f64,
        c_star: f64,
        rows: &'a [choquard::BetaSweepRow],
        t_gap_decreasing: bool,
        cstar_gap_decreasing: bool,
    }
    let payload = Payload {
        beta1: sweep.beta1,
        c_star: sweep.c_star,
        rows: &sweep.rows,
        t_gap_decreasing: sweep.t_gap_decreasing,
        cstar_gap_decreasing: sweep.cstar_gap_decreasing,
    };

    let last = sweep.rows.last().expect("nonempty sweep");
    let checks = vec![
        Check::holds(
            "free_projection_scale_approaches_one",
            sweep.t_gap_decreasing,
            (last.t_star - 1.0).abs(),
            0.0,
        ),
        Check::holds(
            "critical_level_gap_decreasing",
            sweep.cstar_gap_decreasing,
            last.cstar_gap,
            sweep.rows[0].cstar_gap,
        ),
    ];
    let numerics = sweep.rows.iter().find(|r| !r.converged).map(|r| {
        format!(
            "sweep row β = {} stopped unconverged after {} iterations",
            r.beta, r.iterations
        )
    });
    em.report(cfg, "sweep_beta", &payload, &checks, numerics)
}

// ─── eigs ────────────────────────────────────────────────────────────────────

/// Low Schrödinger eigenvalues ζ_j(λ) against their Dirichlet limits
/// β_j − β, for each configured λ.
pub fn eigs(cfg: &RunConfig) -> CliResult<CmdOutcome> {
    let lambdas = &cfg.sweep.lambdas;
    if lambdas.is_empty() {
        return Err(CliError::Config("empty λ list".into()));
    }
    if !lambdas.windows(2).all(|w| w[1] > w[0]) || lambdas[0] <= 0.0 {
        return Err(CliError::Config(
            "λ values must be positive and strictly increasing".into(),
        ));
    }
    let s = tensor_setup(cfg)?;
    let k = cfg.eigs.count;
    let dirichlet = dirichlet_eigs(&s.mask, k)?;

    #[derive(Serialize)]
    struct EigRow {
        lambda: f64,
        j: usize,
        zeta: f64,
        dirichlet_target: f64,
        gap: f64,
    }
    let mut table: Vec<EigRow> = Vec::new();
    let mut morse_indices: Vec<usize> = Vec::new();
    for &lam in lambdas {
        let split = schrodinger_eigs(&s.v, lam, s.beta, k, 0.0)?;
        morse_indices.push(split.morse_index);
        for j in 0..k {
            let zeta = split.eigenvalues[j];
            let target = dirichlet.values[j] - s.beta;
            table.push(EigRow {
                lambda: lam,
                j: j + 1,
                zeta,
                dirichlet_target: target,
                gap: (zeta - target).abs(),
            });
        }
    }

    let em = Emitter::new(cfg);
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            vec![
                num(r.lambda),
                r.j.to_string(),
                num(r.zeta),
                num(r.dirichlet_target),
                num(r.gap),
            ]
        })
        .collect();
    em.csv("eigs", "lambda,j,zeta,dirichlet_target,gap", &rows)?;

    let mut checks = Vec::new();
    for j in 0..k.min(3) {
        let gaps: Vec<f64> = (0..lambdas.len()).map(|i| table[i * k + j].gap).collect();
        let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
        checks.push(Check::holds(
            &format!("spectral_gap_decreasing_j{}", j + 1),
            lambdas.len() < 2 || decreasing,
            *gaps.last().expect("nonempty gap list"),
            gaps[0],
        ));
    }

    #[derive(Serialize)]
    struct Payload {
        beta: f64,
        beta1: f64,
        dirichlet_values: Vec<f64>,
        lambdas: Vec<f64>,
        morse_indices: Vec<usize>,
        rows_lambda_major: Vec<EigRow>,
    }
    let payload = Payload {
        beta: s.beta,
        beta1: s.beta1,
        dirichlet_values: dirichlet.values,
        lambdas: lambdas.clone(),
        morse_indices,
        rows_lambda_major: table,
    };
    em.report(cfg, "eigs", &payload, &checks, None)
}

// ─── indefinite ──────────────────────────────────────────────────────────────

/// Ground state in the indefinite regime β > β₁ via the negative-subspace
/// reduction, with its maximizer cross-checks.
pub fn indefinite(cfg: &RunConfig) -> CliResult<CmdOutcome> {
    let mut s = tensor_setup(cfg)?;
    if s.beta <= s.beta1 {
        return Err(CliError::Config(format!(
            "the indefinite solver needs β > β₁ = {:.6}; got β = {:.6} (below β₁ use `groundstate`)",
            s.beta1, s.beta
        )));
    }
    s.params = s.params.with_indefinite_mode(true)?;
    let k = cfg.eigs.count;
    let split = schrodinger_eigs(
        &s.v,
        s.params.lambda,
        s.beta,
        k,
        degeneracy_margin(s.beta1),
    )?;
    if split.morse_index == 0 {
        return Err(CliError::Config(
            "β exceeds β₁ but the grid resolves no negative eigenvalue; refine the grid".into(),
        ));
    }
    if split.morse_index >= k {
        return Err(CliError::Config(format!(
            "all {k} computed eigenvalues are negative; raise eigs.count so the splitting is complete"
        )));
    }

    let init = initial_guess(cfg, &s)?;
    let out = ground_state_indefinite(&s.params, &s.v, &split, &init, &s.op, &s.opts)?;
    let em = Emitter::new(cfg);
    em.snapshot("indefinite_field", "indefinite", &out.result.field)?;

    #[derive(Serialize)]
    struct Payload {
        morse_index: usize,
        eigenvalues: Vec<f64>,
        solve: SolveSummary,
        reduction_stationarity: f64,
        reduction_newton_iterations: usize,
        level_direct_max: f64,
        cross_check_rel: f64,
        scalar_residual: f64,
    }
    let payload = Payload {
        morse_index: out.morse_index,
        eigenvalues: split.eigenvalues.clone(),
        solve: solve_summary("indefinite", &s, &out.result),
        reduction_stationarity: out.reduction.stationarity,
        reduction_newton_iterations: out.reduction.newton_iterations,
        level_direct_max: out.level_direct_max,
        cross_check_rel: out.cross_check_rel,
        scalar_residual: out.scalar_residual,
    };

    let checks = vec![
        Check::holds(
            "gradient_relative_norm",
            out.result.grad_rel <= s.opts.grad_tol,
            out.result.grad_rel,
            s.opts.grad_tol,
        ),
        Check::below("fiber_maximum_cross_check", out.cross_check_rel, 1e-3),
        Check::below("constraint_scalar_residual", out.scalar_residual, 1e-6),
        Check::below("reduction_stationarity", out.reduction.stationarity, 1e-9),
    ];
    let numerics = convergence_failure(&out.result, "indefinite descent");
    em.report(cfg, "indefinite", &payload, &checks, numerics)
}

// ─── multiplicity ────────────────────────────────────────────────────────────

/// Multistart search for distinct localized solutions; on annulus wells the
/// seeds sit on a ring around the hole, elsewhere they are perturbations of
/// one centered bubble.
pub fn multiplicity(cfg: &RunConfig) -> CliResult<CmdOutcome> {
    let s = tensor_setup(cfg)?;
    let ms = &cfg.multistart;
    let count = ms.seeds.unwrap_or(3).max(1);

    let (seeds, cluster_radius, neighborhood) = if cfg.potential.is_annulus() {
        let width = cfg.potential.outer - cfg.potential.inner;
        let ring = ms
            .ring_radius
            .unwrap_or(0.5 * (cfg.potential.inner + cfg.potential.outer));
        let delta = ms.delta.unwrap_or(0.4 * width);
        let eps = ms.eps.unwrap_or(0.125 * width);
        (
            ring_bubble_seeds(&s.grid, cfg.problem.mu, count, ring, delta, eps)?,
            ms.cluster_radius.unwrap_or(0.5 * width),
            ms.neighborhood.unwrap_or(width),
        )
    } else {
        let anchor = well_anchor(&s.potential, &s.mask);
        let radius =
            mask_inradius_estimate(&s.mask, &anchor).max(3.0 * grid_spacing(&s.grid));
        let base = default_bubble_init(&s.grid, cfg.problem.mu, &anchor, radius)?;
        let base_seed = cfg.solver.init_seed.unwrap_or(0);
        let seeds = (0..count)
            .map(|i| {
                let noise = TensorField::random_smooth(
                    Arc::clone(&s.grid),
                    base_seed.wrapping_add(i as u64),
                    0.25,
                );
                base.add_scaled(&noise, 0.05 * base.l2_norm())
            })
            .collect();
        (
            seeds,
            ms.cluster_radius.unwrap_or(0.5 * radius),
            ms.neighborhood.unwrap_or(radius),
        )
    };

    let out = multistart_multiplicity(
        &s.params,
        &s.v,
        &s.op,
        &seeds,
        cluster_radius,
        neighborhood,
        &s.opts,
    )?;
    let em = Emitter::new(cfg);

    let rows: Vec<Vec<String>> = out
        .solutions
        .iter()
        .map(|sol| {
            let b = &sol.truncated_barycenter;
            let bnorm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            vec![
                sol.seed.to_string(),
                num(sol.level),
                num(b[0]),
                num(b[1]),
                num(bnorm),
                sol.cluster.to_string(),
                sol.in_neighborhood.to_string(),
                sol.converged.to_string(),
            ]
        })
        .collect();
    em.csv(
        "multiplicity",
        "seed,level,barycenter_1,barycenter_2,barycenter_norm,cluster,in_neighborhood,converged",
        &rows,
    )?;

    #[derive(Serialize)]
    struct Payload<'a> {
        cluster_count: usize,
        cluster_radius: f64,
        neighborhood: f64,
        solutions: &'a [choquard::MultistartSolution],
    }
    let payload = Payload {
        cluster_count: out.cluster_count,
        cluster_radius,
        neighborhood,
        solutions: &out.solutions,
    };

    let localized = out.solutions.iter().filter(|x| x.in_neighborhood).count();
    let checks = vec![Check::holds(
        "barycenters_near_well",
        localized == out.solutions.len(),
        localized as f64,
        out.solutions.len() as f64,
    )];
    let numerics = out
        .solutions
        .iter()
        .find(|x| !x.converged)
        .map(|x| format!("seed {} stopped unconverged", x.seed));
    em.report(cfg, "multiplicity", &payload, &checks, numerics)
}

// ─── validate ────────────────────────────────────────────────────────────────

/// Check a configuration without solving: parameter domain, potential
/// sampling, well resolution and derived exponents.
pub fn validate(cfg: &RunConfig) -> CliResult<CmdOutcome> {
    let grid = cfg.grid.build(cfg.problem.dim)?;
    let potential = cfg.potential.build()?;
    let params = cfg.params(cfg.problem.beta.unwrap_or(0.0))?;
    let v = potential.sample_tensor(&grid);
    let report = potential.validate_on_grid(&grid);
    let mask = DomainMask::from_potential_well(&v)?;

    let h = grid_spacing(&grid);
    let anchor = well_anchor(&potential, &mask);
    let inradius = mask_inradius_estimate(&mask, &anchor);
    let cells_across = 2.0 * inradius / h;

    #[derive(Serialize)]
    struct Payload {
        exponents: choquard::Exponents,
        potential_report: choquard::params::ValidationReport,
        well_fraction: f64,
        well_cells: usize,
        well_inradius: f64,
        cells_across_well: f64,
        grid_spacing: f64,
    }
    let payload = Payload {
        exponents: params.exponents(),
        potential_report: report.clone(),
        well_fraction: mask.fraction(),
        well_cells: mask.len(),
        well_inradius: inradius,
        cells_across_well: cells_across,
        grid_spacing: h,
    };

    let em = Emitter::new(cfg);
    let checks = vec![
        Check::holds(
            "potential_well_posed",
            report.all_pass(),
            report.min_v,
            0.0,
        ),
        Check::holds(
            "well_resolved_by_grid",
            cells_across >= 4.0,
            cells_across,
            4.0,
        ),
    ];
    em.report(cfg, "validate", &payload, &checks, None)
}
