//! Text voxel format.
//!
//! ```text
//! voxgrid 1
//! dims nx ny nz
//! resolution r
//! 0110...
//! ```
//!
//! The payload is `nx * ny * nz` characters of `0` (free) or `1` (occupied)
//! in row-major order with `x` fastest. Whitespace in the payload is ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{GridError, GroundTruthEnvironment, VoxelGrid3};
use crate::scalar::Real;

const MAGIC: &str = "voxgrid";
const VERSION: &str = "1";

/// Serializes an environment. Payload lines hold one x-row each.
pub fn write_environment<T: Real>(env: &GroundTruthEnvironment<T>) -> String {
    let [nx, ny, nz] = env.grid.dims();
    let mut out = String::with_capacity(env.grid.len() + env.grid.len() / nx.max(1) + 64);
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "dims {nx} {ny} {nz}");
    // f64 Display is the shortest representation that parses back exactly
    let _ = writeln!(out, "resolution {}", env.grid.resolution().to_f64_lossy());
    for row in env.grid.cells().chunks(nx) {
        out.extend(row.iter().map(|&c| if c { '1' } else { '0' }));
        out.push('\n');
    }
    out
}

pub fn save_environment<T: Real>(env: &GroundTruthEnvironment<T>, path: impl AsRef<Path>) -> Result<(), GridError> {
    fs::write(path, write_environment(env))?;
    Ok(())
}

pub fn load_environment<T: Real>(path: impl AsRef<Path>) -> Result<GroundTruthEnvironment<T>, GridError> {
    let text = fs::read_to_string(path)?;
    parse_environment(&text)
}

pub fn parse_environment<T: Real>(text: &str) -> Result<GroundTruthEnvironment<T>, GridError> {
    let mut lines = text.splitn(4, '\n');
    let header = |n: usize, l: Option<&str>| -> Result<Vec<String>, GridError> {
        let l = l.ok_or_else(|| GridError::MalformedHeader { line: n, reason: "missing line".into() })?;
        Ok(l.split_whitespace().map(str::to_owned).collect())
    };

    let magic = header(1, lines.next())?;
    if magic.len() != 2 || magic[0] != MAGIC {
        return Err(GridError::MalformedHeader { line: 1, reason: format!("expected `{MAGIC} {VERSION}`") });
    }
    if magic[1] != VERSION {
        return Err(GridError::MalformedHeader { line: 1, reason: format!("unsupported version {}", magic[1]) });
    }

    let dims_line = header(2, lines.next())?;
    if dims_line.first().map(String::as_str) != Some("dims") {
        return Err(GridError::MalformedHeader { line: 2, reason: "expected `dims nx ny nz`".into() });
    }
    if dims_line.len() != 4 {
        return Err(GridError::DimensionMismatch(format!("expected 3 dimensions, found {}", dims_line.len() - 1)));
    }
    let mut dims = [0usize; 3];
    for (slot, tok) in dims.iter_mut().zip(&dims_line[1..]) {
        *slot = tok.parse().map_err(|_| GridError::MalformedHeader { line: 2, reason: format!("bad dimension {tok:?}") })?;
    }
    if dims.contains(&0) {
        return Err(GridError::DimensionMismatch(format!("dimensions must be positive, got {dims:?}")));
    }

    let res_line = header(3, lines.next())?;
    if res_line.len() != 2 || res_line[0] != "resolution" {
        return Err(GridError::MalformedHeader { line: 3, reason: "expected `resolution r`".into() });
    }
    let resolution: f64 =
        res_line[1].parse().map_err(|_| GridError::MalformedHeader { line: 3, reason: format!("bad resolution {:?}", res_line[1]) })?;
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(GridError::MalformedHeader { line: 3, reason: "resolution must be positive".into() });
    }

    let expected =
        dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| GridError::DimensionMismatch("grid too large".into()))?;
    let mut cells = Vec::with_capacity(expected);
    for ch in lines.next().unwrap_or("").chars().filter(|c| !c.is_whitespace()) {
        match ch {
            '0' => cells.push(false),
            '1' => cells.push(true),
            other => return Err(GridError::InvalidPayload(other)),
        }
    }
    if cells.len() != expected {
        return Err(GridError::PayloadLength { expected, found: cells.len() });
    }
    Ok(GroundTruthEnvironment::new(VoxelGrid3::from_cells(dims, T::lit(resolution), cells)?))
}
