//! End-to-end tests of the `choquard` binary: exit codes, report shapes,
//! flag/config precedence, CSV tables and byte-level reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_choquard")
}

/// Run the binary with an isolated output and cache directory appended.
fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .env("CHOQUARD_CACHE_DIR", dir.join("cache"))
        .output()
        .expect("the choquard binary should spawn")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process should exit normally")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout should be one JSON report: {e}\n--- stdout ---\n{}\n--- stderr ---\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn assert_success(out: &Output) -> Value {
    assert_eq!(
        code(out),
        0,
        "expected success; stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    stdout_json(out)
}

/// Small, fast ball-well arguments shared by the solver-facing tests.
const BALL: &[&str] = &[
    "--N", "3", "--mu", "1", "--n", "16", "--lambda", "1e3", "--beta-factor", "0.5",
];

#[test]
fn constants_reports_the_known_sharp_constant() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), &["constants", "--N", "4", "--mu", "2"]);
    let v = assert_success(&out);

    let c_hls = v["result"]["c_hls"].as_f64().unwrap();
    assert!(
        (c_hls - 3.8476).abs() < 1e-3,
        "C(4,2) should be ≈ 3.8476, got {c_hls}"
    );
    assert!(v["passed"].as_bool().unwrap());
    let hash = v["config_sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64, "hash should be hex SHA-256");
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));

    // The on-disk report is exactly what was printed.
    let disk = fs::read(tmp.path().join("out/constants.json")).unwrap();
    assert_eq!(disk, out.stdout);
}

#[test]
fn constants_rejects_kernel_exponent_at_or_above_dimension() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), &["constants", "--N", "4", "--mu", "5"]);
    assert_eq!(code(&out), 2, "μ ≥ N is a usage error");
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mu"), "stderr should explain the μ domain: {err}");
    assert!(
        !tmp.path().join("out/constants.json").exists(),
        "a rejected invocation must not write outputs"
    );
}

#[test]
fn constants_routes_agree_in_five_dimensions() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), &["constants", "--N", "5", "--mu", "1"]);
    let v = assert_success(&out);
    let disagreement = v["result"]["shl_disagreement_rel"].as_f64().unwrap();
    assert!(
        disagreement < 1e-3,
        "independent routes to the nonlocal constant should agree to 0.1%, got {disagreement}"
    );
}

#[test]
fn bubble_table_has_hash_header_and_stable_fit() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "bubbles", "--N", "4", "--mu", "2", "--nodes", "4001", "--r-max", "100",
            "--eps", "0.4,0.2,0.1,0.05",
        ],
    );
    let v = assert_success(&out);
    let csv = fs::read_to_string(tmp.path().join("out/bubbles.csv")).unwrap();
    let first = csv.lines().next().unwrap();
    assert_eq!(
        first,
        format!("# config_sha256 = {}", v["config_sha256"].as_str().unwrap())
    );
    assert!(csv.lines().nth(1).unwrap().starts_with("eps,grad_sq,"));
    assert_eq!(csv.lines().count(), 2 + 4, "one row per ε");
}

#[test]
fn groundstate_from_config_writes_report_and_snapshot() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("well.toml");
    fs::write(
        &config,
        r#"
[problem]
dim = 3
mu = 1.0
lambda = 1000.0
beta_factor = 0.5

[grid]
n = 16
half_width = 3.0

[potential]
kind = "ball"
radius = 1.0
"#,
    )
    .unwrap();
    let out = run_in(
        tmp.path(),
        &["groundstate", "--config", config.to_str().unwrap()],
    );
    let v = assert_success(&out);

    assert!(v["result"]["converged"].as_bool().unwrap());
    assert!(v["result"]["level"].as_f64().unwrap() > 0.0);
    assert_eq!(v["result"]["problem"], "penalized");

    // Snapshot pair with the config hash in the sidecar.
    let raw = tmp.path().join("out/groundstate_field.raw");
    let sidecar = tmp.path().join("out/groundstate_field.json");
    assert!(raw.exists() && sidecar.exists());
    let meta: Value = serde_json::from_str(&fs::read_to_string(sidecar).unwrap()).unwrap();
    assert_eq!(meta["extra"]["config_sha256"], v["config_sha256"]);
    let n = meta["n"].as_u64().unwrap() as usize;
    let dims = meta["dims"].as_u64().unwrap() as usize;
    assert_eq!(
        fs::metadata(raw).unwrap().len() as usize,
        n.pow(dims as u32) * 8,
        "raw snapshot holds one f64 per grid point"
    );
}

#[test]
fn missing_config_file_exits_2_without_partial_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        &["groundstate", "--config", "/nonexistent/well.toml"],
    );
    assert_eq!(code(&out), 2);
    assert!(
        !tmp.path().join("out").exists(),
        "nothing may be written when the config cannot be read"
    );
}

#[test]
fn unknown_config_key_is_rejected_with_location() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("bad.toml");
    fs::write(&config, "[problem]\ndim = 3\nbogus_key = 1\n").unwrap();
    let out = run_in(tmp.path(), &["validate", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bogus_key"), "stderr should name the bad key: {err}");
}

#[test]
fn flags_override_config_values() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("well.toml");
    fs::write(
        &config,
        "[problem]\ndim = 3\nmu = 1.0\nlambda = 100.0\nbeta_factor = 0.5\n\n[grid]\nn = 16\n",
    )
    .unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "groundstate",
            "--config",
            config.to_str().unwrap(),
            "--lambda",
            "1000",
            "--no-snapshots",
        ],
    );
    let v = assert_success(&out);
    assert_eq!(v["result"]["lambda"].as_f64().unwrap(), 1000.0);
    assert_eq!(v["config"]["problem"]["lambda"].as_f64().unwrap(), 1000.0);
    assert!(
        !tmp.path().join("out/groundstate_field.raw").exists(),
        "--no-snapshots must suppress the field snapshot"
    );
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let args: Vec<&str> = ["groundstate"]
        .iter()
        .chain(BALL)
        .chain(&["--init-seed", "11"])
        .copied()
        .collect();
    let first = run_in(tmp.path(), &args);
    assert_eq!(code(&first), 0);
    let report1 = fs::read(tmp.path().join("out/groundstate.json")).unwrap();
    let raw1 = fs::read(tmp.path().join("out/groundstate_field.raw")).unwrap();

    let second = run_in(tmp.path(), &args);
    assert_eq!(code(&second), 0);
    assert_eq!(first.stdout, second.stdout, "stdout must be reproducible");
    assert_eq!(
        report1,
        fs::read(tmp.path().join("out/groundstate.json")).unwrap()
    );
    assert_eq!(
        raw1,
        fs::read(tmp.path().join("out/groundstate_field.raw")).unwrap(),
        "field snapshots must be bit-identical across reruns"
    );
}

#[test]
fn lambda_sweep_emits_monotonicity_verdict_csv() {
    let tmp = TempDir::new().unwrap();
    let args: Vec<&str> = ["sweep-lambda"]
        .iter()
        .chain(BALL)
        .chain(&["--lambdas", "1e2,1e3,1e4", "--no-snapshots"])
        .copied()
        .collect();
    let out = run_in(tmp.path(), &args);
    let v = assert_success(&out);
    assert!(v["passed"].as_bool().unwrap());

    let csv = fs::read_to_string(tmp.path().join("out/sweep_lambda.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        format!("# config_sha256 = {}", v["config_sha256"].as_str().unwrap())
    );
    let header = lines.next().unwrap();
    assert!(
        header.ends_with(",monotone_so_far"),
        "the sweep table carries a per-row monotonicity verdict: {header}"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(
        rows.iter().all(|r| r.ends_with(",true")),
        "all verdicts should hold on this well: {rows:?}"
    );

    // Outside mass strictly decreases along the printed rows.
    let outside: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(outside.windows(2).all(|w| w[1] < w[0]), "{outside:?}");
}

#[test]
fn beta_sweep_tracks_the_free_projection_scale() {
    let tmp = TempDir::new().unwrap();
    let args: Vec<&str> = ["sweep-beta"]
        .iter()
        .chain(BALL)
        .chain(&[
            "--beta-factors", "0.3,0.1,0.03", "--nodes", "3001", "--r-max", "100",
        ])
        .copied()
        .collect();
    let out = run_in(tmp.path(), &args);
    let v = assert_success(&out);
    assert!(v["passed"].as_bool().unwrap());

    let csv = fs::read_to_string(tmp.path().join("out/sweep_beta.csv")).unwrap();
    let t_gaps: Vec<f64> = csv
        .lines()
        .skip(2)
        .map(|r| r.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert_eq!(t_gaps.len(), 3);
    assert!(
        t_gaps.windows(2).all(|w| w[1] < w[0]),
        "|t - 1| must shrink as β vanishes: {t_gaps:?}"
    );
}

#[test]
fn eigenvalue_gaps_shrink_along_the_lambda_decades() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "eigs", "--N", "3", "--mu", "1", "--n", "16", "--beta-factor", "0.5",
            "--count", "3", "--lambdas", "1e2,1e3,1e4",
        ],
    );
    let v = assert_success(&out);
    assert!(v["passed"].as_bool().unwrap());

    let csv = fs::read_to_string(tmp.path().join("out/eigs.csv")).unwrap();
    let gap = |line: &str| line.split(',').nth(4).unwrap().parse::<f64>().unwrap();
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 9, "3 λ × 3 eigenvalues");
    // j = 1 rows are 0, 3, 6 in λ-major order.
    let (g0, g1, g2) = (gap(rows[0]), gap(rows[3]), gap(rows[6]));
    assert!(g2 < g1 && g1 < g0, "fundamental gap: {g0} → {g1} → {g2}");
}

#[test]
fn indefinite_solve_passes_its_cross_checks() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "indefinite", "--N", "3", "--mu", "1", "--n", "16", "--lambda", "1e3",
            "--beta-factor", "1.5", "--no-snapshots",
        ],
    );
    let v = assert_success(&out);
    assert!(v["passed"].as_bool().unwrap());
    assert_eq!(v["result"]["morse_index"].as_u64().unwrap(), 1);
    assert!(v["result"]["cross_check_rel"].as_f64().unwrap() < 1e-3);
    assert!(v["result"]["solve"]["converged"].as_bool().unwrap());
}

#[test]
fn indefinite_below_beta1_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "indefinite", "--N", "3", "--mu", "1", "--n", "16", "--lambda", "1e3",
            "--beta-factor", "0.5",
        ],
    );
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("groundstate"), "should point at the definite solver: {err}");
}

#[test]
fn multiplicity_on_an_annulus_finds_distinct_ring_solutions() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "multiplicity", "--N", "3", "--mu", "1", "--n", "16", "--lambda", "1e3",
            "--beta-factor", "0.5", "--well", "annulus", "--well-inner", "0.7",
            "--well-outer", "1.9", "--seeds", "3", "--no-snapshots",
        ],
    );
    let v = assert_success(&out);
    assert!(v["passed"].as_bool().unwrap());
    assert_eq!(v["result"]["cluster_count"].as_u64().unwrap(), 3);
    for sol in v["result"]["solutions"].as_array().unwrap() {
        assert!(sol["in_neighborhood"].as_bool().unwrap());
        assert!(sol["converged"].as_bool().unwrap());
    }
}

#[test]
fn validate_passes_a_sane_well_and_flags_an_unresolved_one() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), &["validate", "--N", "3", "--n", "16"]);
    let v = assert_success(&out);
    assert!(v["passed"].as_bool().unwrap());

    // A well much smaller than the grid spacing fails the resolution check
    // (exit 1: the run completes but a scientific check fails).
    let tmp2 = TempDir::new().unwrap();
    let out2 = run_in(
        tmp2.path(),
        &["validate", "--N", "3", "--n", "16", "--well-radius", "0.2"],
    );
    assert_eq!(code(&out2), 1, "under-resolved well is a failed check");
    let v2 = stdout_json(&out2);
    assert!(!v2["passed"].as_bool().unwrap());
    assert!(
        tmp2.path().join("out/validate.json").exists(),
        "the report is still written so the failure can be inspected"
    );
}

#[test]
fn bad_usage_exits_2() {
    let out = Command::new(bin())
        .arg("frobnicate")
        .output()
        .expect("spawn");
    assert_eq!(code(&out), 2, "clap rejects unknown subcommands with 2");
}
