//! Field snapshots and cache files.
//!
//! One snapshot is a pair of files sharing a base path: `<base>.raw` holds
//! the sample values as raw little-endian 64-bit floats in row-major order,
//! and `<base>.json` is a sidecar `{dims, n, L, kind, label, …}` describing
//! the backing grid. Round trips are bit-exact: bytes are written with
//! `f64::to_le_bytes` and read back verbatim, so NaN payloads, signed zeros,
//! and subnormals all survive.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::grid::{RadialField, RadialGrid, TensorField, TensorGrid};
use crate::Result;

/// Environment variable overriding the cache directory for computed tables.
pub const CACHE_DIR_ENV: &str = "CHOQUARD_CACHE_DIR";

/// Sidecar metadata stored next to every raw-float file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SnapshotMeta {
    /// Space dimension of the backing grid.
    pub dims: usize,
    /// Points per axis (tensor), node count (radial), or entry count (table).
    pub n: usize,
    /// Box half-width (tensor) or maximal radius (radial); 0 for plain tables.
    #[serde(rename = "L")]
    pub l: f64,
    /// One of "tensor", "radial", "table".
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Radial grading ratio, needed to rebuild radial grids bit-exactly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<f64>,
    /// Free-form extension data (e.g. kernel parameters for cached tables).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
}

fn raw_path(base: &Path) -> PathBuf {
    let mut p = base.as_os_str().to_owned();
    p.push(".raw");
    PathBuf::from(p)
}

fn json_path(base: &Path) -> PathBuf {
    let mut p = base.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

/// Write a snapshot (`<base>.raw` + `<base>.json`).
pub fn write_snapshot(base: &Path, meta: &SnapshotMeta, data: &[f64]) -> Result<()> {
    if let Some(dir) = base.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut w = BufWriter::new(fs::File::create(raw_path(base))?);
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    let json = serde_json::to_string_pretty(meta)?;
    fs::write(json_path(base), json)?;
    Ok(())
}

/// Read a snapshot written by [`write_snapshot`].
pub fn read_snapshot(base: &Path) -> Result<(SnapshotMeta, Vec<f64>)> {
    let meta: SnapshotMeta = serde_json::from_str(&fs::read_to_string(json_path(base))?)?;
    let mut bytes = Vec::new();
    fs::File::open(raw_path(base))?.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(CoreError::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("raw file length {} is not a multiple of 8", bytes.len()),
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((meta, data))
}

/// Whether both files of a snapshot exist.
pub fn snapshot_exists(base: &Path) -> bool {
    raw_path(base).is_file() && json_path(base).is_file()
}

/// Save a tensor field; the sidecar records enough to rebuild the grid.
pub fn save_tensor_field(base: &Path, field: &TensorField) -> Result<()> {
    let g = field.grid();
    let meta = SnapshotMeta {
        dims: g.dim(),
        n: g.n(),
        l: g.half_width(),
        kind: "tensor".into(),
        label: field.label().map(str::to_owned),
        grading: None,
        extra: None,
    };
    write_snapshot(base, &meta, field.as_slice())
}

/// Load a tensor field, rebuilding its grid from the sidecar.
pub fn load_tensor_field(base: &Path) -> Result<TensorField> {
    let (meta, data) = read_snapshot(base)?;
    if meta.kind != "tensor" {
        return Err(CoreError::GridMismatch(format!(
            "snapshot kind is {:?}, expected \"tensor\"",
            meta.kind
        )));
    }
    let grid = TensorGrid::new(meta.dims, meta.n, meta.l)?;
    let field = TensorField::from_data(grid, data)?;
    Ok(match meta.label {
        Some(l) => field.with_label(l),
        None => field,
    })
}

/// Save a radial field; the grading ratio goes into the sidecar so the node
/// layout can be reproduced bit-exactly.
pub fn save_radial_field(base: &Path, field: &RadialField) -> Result<()> {
    let g = field.grid();
    let meta = SnapshotMeta {
        dims: g.dim(),
        n: g.len(),
        l: g.r_max(),
        kind: "radial".into(),
        label: field.label().map(str::to_owned),
        grading: Some(g.grading_ratio()),
        extra: None,
    };
    write_snapshot(base, &meta, field.data())
}

/// Load a radial field, rebuilding its grid from the sidecar.
pub fn load_radial_field(base: &Path) -> Result<RadialField> {
    let (meta, data) = read_snapshot(base)?;
    if meta.kind != "radial" {
        return Err(CoreError::GridMismatch(format!(
            "snapshot kind is {:?}, expected \"radial\"",
            meta.kind
        )));
    }
    let grading = meta.grading.ok_or_else(|| {
        CoreError::GridMismatch("radial snapshot is missing its grading ratio".into())
    })?;
    let grid = RadialGrid::new(meta.dims, meta.l, meta.n, grading)?;
    let field = RadialField::from_data(grid, data)?;
    Ok(match meta.label {
        Some(l) => field.with_label(l),
        None => field,
    })
}

/// Directory for cached computed tables: `$CHOQUARD_CACHE_DIR` if set,
/// otherwise `<system temp>/choquard-cache`. Created on demand.
pub fn cache_dir() -> Result<PathBuf> {
    let dir = match std::env::var_os(CACHE_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => std::env::temp_dir().join("choquard-cache"),
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}
