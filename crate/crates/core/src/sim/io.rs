//! Sweep result files: a CSV table plus a JSON sidecar holding the metadata.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces every value bit for bit.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::{SweepPoint, SweepResult};
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 6] = ["power_db", "metric", "mean", "stderr", "trials", "failures"];

/// `results.csv` → `results.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Writes the CSV table and its metadata sidecar.
pub fn serialize_result(r: &SweepResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(CSV_HEADER).map_err(|e| csv_error(path, e))?;
    for p in &r.points {
        w.write_record([
            p.power_db.to_string(),
            p.metric.clone(),
            p.mean.to_string(),
            p.stderr.to_string(),
            p.trials.to_string(),
            p.failures.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let meta_path = sidecar_path(path);
    let mut text = serde_json::to_string_pretty(&r.metadata)
        .map_err(|e| Error::invalid(format!("metadata is not serializable: {e}")))?;
    text.push('\n');
    std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    name: &str,
    field: &str,
) -> Result<T> {
    field.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("column '{name}': cannot parse '{field}'"),
    })
}

/// Reads a result table; the sidecar is optional and yields `null` when absent.
pub fn read_result(path: &Path) -> Result<SweepResult> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        points.push(SweepPoint {
            power_db: parse_field(path, line, CSV_HEADER[0], &rec[0])?,
            metric: rec[1].to_string(),
            mean: parse_field(path, line, CSV_HEADER[2], &rec[2])?,
            stderr: parse_field(path, line, CSV_HEADER[3], &rec[3])?,
            trials: parse_field(path, line, CSV_HEADER[4], &rec[4])?,
            failures: parse_field(path, line, CSV_HEADER[5], &rec[5])?,
        });
    }
    let meta_path = sidecar_path(path);
    let metadata = match std::fs::read_to_string(&meta_path) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: meta_path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => serde_json::Value::Null,
        Err(e) => return Err(Error::io(&meta_path, e)),
    };
    Ok(SweepResult { points, metadata })
}
