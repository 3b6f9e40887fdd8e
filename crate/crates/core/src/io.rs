//! Snapshot files and content digests.
//!
//! A snapshot is an ASCII header line `LANDAU-GRID 1`, a second line
//! `N L gamma time`, then `N^3` little-endian `f64` values with `v_1`
//! varying fastest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::dist::GridDistribution;
use crate::error::{LabError, Result};
use crate::grid::VelocityGrid;

pub const SNAPSHOT_MAGIC: &str = "LANDAU-GRID 1";

/// Decoded snapshot.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub grid: Arc<VelocityGrid>,
    pub gamma: f64,
    pub time: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn into_distribution(self) -> Result<GridDistribution> {
        GridDistribution::from_values(self.grid, self.values)
    }
}

/// Shortest round-trip decimal form, so headers re-parse to the same bits.
fn header_number(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_snapshot<W: Write>(mut out: W, f: &GridDistribution, gamma: f64, time: f64) -> Result<()> {
    let g = f.grid();
    writeln!(out, "{SNAPSHOT_MAGIC}")?;
    writeln!(
        out,
        "{} {} {} {}",
        g.points_per_axis(),
        header_number(g.half_extent()),
        header_number(gamma),
        header_number(time)
    )?;
    let mut bytes = Vec::with_capacity(8 * f.values().len());
    for v in f.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(input: R) -> Result<Snapshot> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end_matches(['\n', '\r']) != SNAPSHOT_MAGIC {
        return Err(LabError::Format(format!(
            "expected header {SNAPSHOT_MAGIC:?}, found {line:?}"
        )));
    }
    line.clear();
    reader.read_line(&mut line)?;
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(LabError::Format(format!("expected `N L gamma time`, found {line:?}")));
    }
    let bad = |what: &str| LabError::Format(format!("cannot parse {what} in {line:?}"));
    let n: usize = fields[0].parse().map_err(|_| bad("N"))?;
    let l: f64 = fields[1].parse().map_err(|_| bad("L"))?;
    let gamma: f64 = fields[2].parse().map_err(|_| bad("gamma"))?;
    let time: f64 = fields[3].parse().map_err(|_| bad("time"))?;
    let grid = Arc::new(VelocityGrid::new(l, n)?);
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * grid.len() {
        return Err(LabError::Format(format!(
            "expected {} payload bytes, found {}",
            8 * grid.len(),
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(Snapshot {
        grid,
        gamma,
        time,
        values,
    })
}

pub fn save_snapshot(path: &Path, f: &GridDistribution, gamma: f64, time: f64) -> Result<()> {
    let file = File::create(path).map_err(|e| with_path(e, path))?;
    write_snapshot(BufWriter::new(file), f, gamma, time)
}

pub fn load_snapshot(path: &Path) -> Result<Snapshot> {
    let file = File::open(path).map_err(|e| with_path(e, path))?;
    read_snapshot(file)
}

fn with_path(e: std::io::Error, path: &Path) -> LabError {
    LabError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Lowercase hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of the raw little-endian bytes of a sequence of value arrays.
pub fn digest_values<'a, I: IntoIterator<Item = &'a [f64]>>(arrays: I) -> String {
    let mut hasher = Sha256::new();
    for values in arrays {
        for v in values {
            hasher.update(v.to_le_bytes());
        }
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
