//! Field and matrix files.
//!
//! A field file is raw little-endian `f64` values in row-major order. Its
//! sidecar (same path, `.json` extension) holds
//! `{"dim", "half_width", "points_per_dim", "role"}`.
//!
//! A matrix file starts with two little-endian `u64` values `(rows, cols)`
//! followed by `rows * cols` little-endian `f64` values, row-major. Its sidecar
//! carries the grid keys plus `rows` and `cols`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Field, Grid, GridError, GridSpec};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: bad sidecar: {source}")]
    Sidecar { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_dim: usize,
    pub role: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixHeader {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_dim: usize,
    pub role: String,
    pub rows: u64,
    pub cols: u64,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_sidecar<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(io_err(&side))?;
    serde_json::from_str(&text).map_err(|source| IoError::Sidecar { path: side, source })
}

fn write_sidecar<T: Serialize>(path: &Path, header: &T) -> Result<(), IoError> {
    let side = sidecar_path(path);
    let mut text = serde_json::to_string_pretty(header).expect("header serializes");
    text.push('\n');
    fs::write(&side, text).map_err(io_err(&side))
}

fn encode_f64(values: &[f64], out: &mut Vec<u8>) {
    out.reserve(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn decode_f64(path: &Path, bytes: &[u8]) -> Result<Vec<f64>, IoError> {
    if !bytes.len().is_multiple_of(8) {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            msg: format!("{} bytes is not a whole number of f64 values", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn write_field(path: &Path, field: &Field, role: &str) -> Result<(), IoError> {
    let mut bytes = Vec::new();
    encode_f64(field.values(), &mut bytes);
    fs::write(path, bytes).map_err(io_err(path))?;
    let spec = field.grid().spec();
    write_sidecar(
        path,
        &FieldHeader {
            dim: spec.dim,
            half_width: spec.half_width,
            points_per_dim: spec.points_per_dim,
            role: role.to_string(),
        },
    )
}

/// Reads a field and its role string.
pub fn read_field(path: &Path) -> Result<(Field, String), IoError> {
    let header: FieldHeader = read_sidecar(path)?;
    let grid = Grid::new(GridSpec::new(header.dim, header.half_width, header.points_per_dim))?;
    let bytes = fs::read(path).map_err(io_err(path))?;
    let values = decode_f64(path, &bytes)?;
    Ok((Field::new(grid, values)?, header.role))
}

/// Writes a `rows x cols` matrix whose columns are indexed by `grid` nodes
/// (or, for kernels, whose rows and columns both are).
pub fn write_matrix(
    path: &Path,
    grid: &Grid,
    rows: usize,
    cols: usize,
    data: &[f64],
    role: &str,
) -> Result<(), IoError> {
    if data.len() != rows * cols {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            msg: format!("{} values for a {rows}x{cols} matrix", data.len()),
        });
    }
    let mut bytes = Vec::with_capacity(16 + 8 * data.len());
    bytes.extend_from_slice(&(rows as u64).to_le_bytes());
    bytes.extend_from_slice(&(cols as u64).to_le_bytes());
    encode_f64(data, &mut bytes);
    fs::write(path, bytes).map_err(io_err(path))?;
    let spec = grid.spec();
    write_sidecar(
        path,
        &MatrixHeader {
            dim: spec.dim,
            half_width: spec.half_width,
            points_per_dim: spec.points_per_dim,
            role: role.to_string(),
            rows: rows as u64,
            cols: cols as u64,
        },
    )
}

pub struct Matrix {
    pub grid: Grid,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub role: String,
}

pub fn read_matrix(path: &Path) -> Result<Matrix, IoError> {
    let header: MatrixHeader = read_sidecar(path)?;
    let grid = Grid::new(GridSpec::new(header.dim, header.half_width, header.points_per_dim))?;
    let bytes = fs::read(path).map_err(io_err(path))?;
    let bad = |msg: String| IoError::Format {
        path: path.to_path_buf(),
        msg,
    };
    if bytes.len() < 16 {
        return Err(bad("missing shape header".into()));
    }
    let rows = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    if rows != header.rows || cols != header.cols {
        return Err(bad(format!(
            "shape header {rows}x{cols} disagrees with sidecar {}x{}",
            header.rows, header.cols
        )));
    }
    let data = decode_f64(path, &bytes[16..])?;
    if data.len() as u64 != rows * cols {
        return Err(bad(format!("expected {} values, found {}", rows * cols, data.len())));
    }
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(GridError::NonFinite(i).into());
    }
    Ok(Matrix {
        grid,
        rows: rows as usize,
        cols: cols as usize,
        data,
        role: header.role,
    })
}
