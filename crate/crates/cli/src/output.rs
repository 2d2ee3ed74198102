//! Report and table emission.
//!
//! Every command produces one JSON report (also printed to stdout) and,
//! where natural, a CSV table and binary field snapshots. All of them embed
//! the SHA-256 hash of the resolved configuration, and all of them are
//! byte-identical across reruns of the same configuration.

use std::fs;
use std::path::PathBuf;

use choquard::io::{write_snapshot, SnapshotMeta};
use choquard::TensorField;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// One named scientific check with its measured value and tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Measured value (the quantity the threshold applies to).
    pub value: f64,
    /// Passing threshold; `value` must stay below it unless stated
    /// otherwise in the check name.
    pub threshold: f64,
}

impl Check {
    /// `value` must stay strictly below `threshold`.
    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            pass: value < threshold,
            value,
            threshold,
        }
    }

    /// A plain predicate; `value`/`threshold` carry context numbers.
    pub fn holds(name: &str, pass: bool, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            pass,
            value,
            threshold,
        }
    }
}

/// What a finished command hands back to `main` for printing and exit-code
/// selection. Outputs are already on disk at this point: a failed check
/// reports exit code 1 *after* the artifacts are written.
pub struct CmdOutcome {
    /// The JSON report, exactly as written to disk.
    pub stdout: String,
    /// Names of failed scientific checks (exit 1 when nonempty).
    pub failed_checks: Vec<String>,
    /// Set when the numerics did not converge (exit 3).
    pub numerics_failure: Option<String>,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'a str,
    config_sha256: &'a str,
    passed: bool,
    checks: &'a [Check],
    result: &'a T,
    config: &'a RunConfig,
}

/// Shared emission state for one command invocation.
pub struct Emitter {
    pub dir: PathBuf,
    pub hash: String,
    snapshots: bool,
}

impl Emitter {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            dir: PathBuf::from(&cfg.output.dir),
            hash: cfg.sha256(),
            snapshots: cfg.output.snapshots,
        }
    }

    /// Write `<dir>/<command>.json` and return its exact text together with
    /// the outcome skeleton.
    pub fn report<T: Serialize>(
        &self,
        cfg: &RunConfig,
        command: &str,
        payload: &T,
        checks: &[Check],
        numerics_failure: Option<String>,
    ) -> CliResult<CmdOutcome> {
        let report = Report {
            command,
            config_sha256: &self.hash,
            passed: checks.iter().all(|c| c.pass),
            checks,
            result: payload,
            config: cfg,
        };
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        fs::create_dir_all(&self.dir)?;
        fs::write(self.dir.join(format!("{command}.json")), &text)?;
        Ok(CmdOutcome {
            stdout: text,
            failed_checks: checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| c.name.clone())
                .collect(),
            numerics_failure,
        })
    }

    /// Write `<dir>/<name>.csv`: a hash comment, a header line, then the
    /// rows.
    pub fn csv(&self, name: &str, header: &str, rows: &[Vec<String>]) -> CliResult<()> {
        let mut text = format!("# config_sha256 = {}\n{header}\n", self.hash);
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        fs::create_dir_all(&self.dir)?;
        fs::write(self.dir.join(format!("{name}.csv")), text)?;
        Ok(())
    }

    /// Snapshot a field as `<dir>/<name>.raw` + `<dir>/<name>.json` with
    /// the config hash in the sidecar (no-op when snapshots are disabled).
    pub fn snapshot(&self, name: &str, command: &str, field: &TensorField) -> CliResult<()> {
        if !self.snapshots {
            return Ok(());
        }
        let g = field.grid();
        let meta = SnapshotMeta {
            dims: g.dim(),
            n: g.n(),
            l: g.half_width(),
            kind: "tensor".into(),
            label: Some(name.into()),
            grading: None,
            extra: Some(serde_json::json!({
                "command": command,
                "config_sha256": self.hash,
            })),
        };
        fs::create_dir_all(&self.dir)?;
        write_snapshot(&self.dir.join(name), &meta, field.as_slice())
            .map_err(|e| CliError::Config(format!("snapshot write failed: {e}")))
    }
}

/// Shortest-roundtrip decimal form of a float (the JSON form), used for
/// deterministic CSV cells.
pub fn num(x: f64) -> String {
    serde_json::to_string(&x).unwrap_or_else(|_| "null".into())
}
