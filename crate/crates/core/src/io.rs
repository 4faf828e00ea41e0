//! CSV and raw binary exchange of fields on (t, r) grids.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::{RadialGrid, TimeGrid};
use crate::measurements::MeasurementSet;

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

/// `t,r,value` rows, time-major.
pub fn write_radial_series(path: &Path, time: &TimeGrid, radial: &RadialGrid, rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["t", "r", "value"]).map_err(|e| csv_err(path, e))?;
    for (n, row) in rows.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            w.serialize((time.t(n), radial.r(i), v)).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `t,value` rows.
pub fn write_time_series(path: &Path, time: &TimeGrid, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["t", "value"]).map_err(|e| csv_err(path, e))?;
    for (n, v) in values.iter().enumerate() {
        w.serialize((time.t(n), v)).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Little-endian f64 values, no header; the shape goes into the run manifest.
pub fn write_binary(path: &Path, values: impl IntoIterator<Item = f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary(path: &Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse(format!("{}: length {} is not a multiple of 8", path.display(), bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect())
}

#[derive(Deserialize)]
struct RadialRow {
    t: f64,
    r: f64,
    value: f64,
}

#[derive(Deserialize)]
struct TimeRow {
    t: f64,
    value: f64,
}

fn open(path: &Path, what: &str) -> Result<csv::Reader<File>> {
    if !path.exists() {
        return Err(Error::Config(format!("{what} file {} does not exist", path.display())));
    }
    csv::Reader::from_path(path).map_err(|e| csv_err(path, e))
}

/// Recover a uniform grid {0, Δ, …} from sorted distinct samples.
fn uniform_time(ts: &[f64], path: &Path) -> Result<TimeGrid> {
    let steps = ts.len() - 1;
    let horizon = *ts.last().expect("nonempty");
    if ts[0].abs() > 1e-12 * horizon.max(1.0) {
        return Err(Error::Parse(format!("{}: time samples must start at 0", path.display())));
    }
    let grid = TimeGrid::new(horizon, steps)?;
    for (n, t) in ts.iter().enumerate() {
        if (t - grid.t(n)).abs() > 1e-9 * horizon.max(1.0) {
            return Err(Error::Parse(format!("{}: time samples are not uniform (t = {t})", path.display())));
        }
    }
    Ok(grid)
}

/// Recover the cell-centred grid r_i = (i+½)Δr.
fn cell_centred(rs: &[f64], path: &Path) -> Result<RadialGrid> {
    let n = rs.len();
    let dr = rs[0] * 2.0;
    let grid = RadialGrid::new(dr * n as f64, n)?;
    for (i, r) in rs.iter().enumerate() {
        if (r - grid.r(i)).abs() > 1e-9 * grid.radius {
            return Err(Error::Parse(format!("{}: radii are not cell-centred and uniform (r = {r})", path.display())));
        }
    }
    Ok(grid)
}

fn key(x: f64) -> i64 {
    (x * 1e12).round() as i64
}

/// Read g₁ (`t,r,value`) and g₂ (`t,value`); the grids are inferred from the
/// samples and must be uniform in t and cell-centred in r.
pub fn read_measurements(g1_path: &Path, g2_path: &Path) -> Result<MeasurementSet> {
    let mut g1: BTreeMap<i64, BTreeMap<i64, (f64, f64)>> = BTreeMap::new();
    let mut times: BTreeMap<i64, f64> = BTreeMap::new();
    for row in open(g1_path, "g1 measurement")?.deserialize() {
        let row: RadialRow = row.map_err(|e| csv_err(g1_path, e))?;
        times.insert(key(row.t), row.t);
        g1.entry(key(row.t)).or_default().insert(key(row.r), (row.r, row.value));
    }
    if g1.is_empty() {
        return Err(Error::Parse(format!("{}: no data rows", g1_path.display())));
    }
    let ts: Vec<f64> = times.values().copied().collect();
    let time = uniform_time(&ts, g1_path)?;
    let first = g1.values().next().expect("nonempty");
    let rs: Vec<f64> = first.values().map(|p| p.0).collect();
    let radial = cell_centred(&rs, g1_path)?;
    let mut rows = Vec::with_capacity(ts.len());
    for per_t in g1.values() {
        if per_t.len() != rs.len() || !per_t.keys().zip(first.keys()).all(|(a, b)| a == b) {
            return Err(Error::Parse(format!("{}: every time level needs the same radii", g1_path.display())));
        }
        rows.push(per_t.values().map(|p| p.1).collect());
    }
    let mut g2: BTreeMap<i64, f64> = BTreeMap::new();
    for row in open(g2_path, "g2 measurement")?.deserialize() {
        let row: TimeRow = row.map_err(|e| csv_err(g2_path, e))?;
        g2.insert(key(row.t), row.value);
    }
    if g2.len() != ts.len() || !g2.keys().zip(times.keys()).all(|(a, b)| a == b) {
        return Err(Error::Parse(format!(
            "{}: times do not match those of {}",
            g2_path.display(),
            g1_path.display()
        )));
    }
    MeasurementSet::new(time, radial, rows, g2.into_values().collect())
}
