//! Writing, reading and checking the files a run leaves behind.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hierfl_core::costmodel::{AccuracyPoint, CostReport};
use hierfl_core::datasets::write_partition as write_assignment;
use hierfl_core::hierfavg::{Event, TraceRecord};
use hierfl_core::Scalar;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::experiment::{BoundRow, Prepared};

pub const TRACE: &str = "trace.csv";
pub const PARTITION: &str = "partition.txt";
pub const DIVERGENCE: &str = "divergence.txt";
pub const BOUNDS: &str = "bounds.csv";
pub const BOUNDS_SUMMARY: &str = "bounds_summary.txt";
pub const COST: &str = "cost.csv";
pub const COST_SUMMARY: &str = "cost_summary.txt";
pub const MANIFEST: &str = "manifest.toml";
pub const SWEEP: &str = "sweep.csv";
pub const GRID: &str = "bound_grid.csv";

pub const TRACE_COLUMNS: [&str; 7] = ["k", "event", "global_loss", "test_accuracy", "deviation", "grad_norm_sq", "eta"];
pub const BOUNDS_COLUMNS: [&str; 7] = ["k", "q", "eta", "deviation", "g_c", "g_c_end", "within_bound"];
pub const COST_COLUMNS: [&str; 4] = ["k", "cumulative_seconds", "cumulative_joules", "accuracy"];

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(Error::io(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_trace<T: Scalar>(path: &Path, trace: &[TraceRecord<T>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TRACE_COLUMNS)?;
    for r in trace {
        w.write_record([
            r.k.to_string(),
            r.event.as_str().to_string(),
            r.global_loss.to_string(),
            r.test_accuracy.to_string(),
            opt(r.deviation),
            r.grad_norm_sq.to_string(),
            r.eta.to_string(),
        ])?;
    }
    w.flush().map_err(Error::io(path))
}

/// One row of a trace file read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub event: Event,
    pub global_loss: f64,
    pub test_accuracy: f64,
    pub deviation: Option<f64>,
    pub grad_norm_sq: f64,
    pub eta: f64,
}

impl From<&TraceRow> for AccuracyPoint {
    fn from(r: &TraceRow) -> Self {
        AccuracyPoint { k: r.k, accuracy: r.test_accuracy }
    }
}

fn bad(path: &Path, reason: impl Into<String>) -> Error {
    Error::Artifact { path: path.to_path_buf(), reason: reason.into() }
}

fn field<F: std::str::FromStr>(path: &Path, line: usize, name: &str, raw: &str) -> Result<F> {
    raw.parse().map_err(|_| bad(path, format!("line {line}: cannot parse {name} from {raw:?}")))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(path, e.to_string()))?;
    let header = reader.headers()?.clone();
    if header.iter().ne(TRACE_COLUMNS) {
        return Err(bad(path, format!("expected columns {}", TRACE_COLUMNS.join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let f = |j: usize| rec.get(j).unwrap_or("");
        rows.push(TraceRow {
            k: field(path, line, "k", f(0))?,
            event: field(path, line, "event", f(1))?,
            global_loss: field(path, line, "global_loss", f(2))?,
            test_accuracy: field(path, line, "test_accuracy", f(3))?,
            deviation: if f(4).is_empty() { None } else { Some(field(path, line, "deviation", f(4))?) },
            grad_norm_sq: field(path, line, "grad_norm_sq", f(5))?,
            eta: field(path, line, "eta", f(6))?,
        });
    }
    Ok(rows)
}

pub fn write_bound_rows<T: Scalar>(path: &Path, rows: &[BoundRow<T>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(BOUNDS_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.q.to_string(),
            r.eta.to_string(),
            r.deviation.to_string(),
            r.g_c.to_string(),
            r.g_c_end.to_string(),
            r.within().to_string(),
        ])?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn write_cost(path: &Path, report: &CostReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(COST_COLUMNS)?;
    for p in &report.points {
        w.write_record([p.k.to_string(), p.seconds.to_string(), p.joules.to_string(), p.accuracy.to_string()])?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn write_text(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(Error::io(path))?);
    body(&mut out)?;
    out.flush().map_err(Error::io(path))
}

pub fn write_key_values(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    write_text(path, |w| {
        for (k, v) in pairs {
            writeln!(w, "{k} {v}").map_err(Error::io(path))?;
        }
        Ok(())
    })
}

pub fn write_partition<T: Scalar>(path: &Path, prepared: &Prepared<T>, config: &ExperimentConfig) -> Result<()> {
    write_text(path, |w| Ok(write_assignment(w, &prepared.train, &prepared.partition, config.partition)?))
}

/// Check a CSV artifact: a nonempty header, equal column counts on every
/// row, and strictly increasing `k` when there is such a column.
pub fn validate_csv(path: &Path) -> Result<usize> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path).map_err(|e| bad(path, e.to_string()))?;
    let header = reader.headers()?.clone();
    if header.is_empty() || header.iter().any(str::is_empty) {
        return Err(bad(path, "missing or blank header"));
    }
    let k_col = header.iter().position(|h| h == "k");
    let mut last_k: Option<usize> = None;
    let mut rows = 0;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != header.len() {
            return Err(bad(path, format!("line {line}: {} fields, header has {}", rec.len(), header.len())));
        }
        if let Some(c) = k_col {
            let k: usize = field(path, line, "k", &rec[c])?;
            if last_k.is_some_and(|prev| k <= prev) {
                return Err(bad(path, format!("line {line}: k={k} does not increase")));
            }
            last_k = Some(k);
        }
        rows += 1;
    }
    Ok(rows)
}

/// Every regular file below `dir`, relative and sorted.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        for entry in fs::read_dir(dir).map_err(Error::io(dir))? {
            let path = entry.map_err(Error::io(dir))?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                out.push(path.strip_prefix(root).expect("below root").to_path_buf());
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

/// Validate every CSV file below `dir`; returns how many were checked.
pub fn validate_dir(dir: &Path) -> Result<usize> {
    let mut checked = 0;
    for rel in list_files(dir)? {
        if rel.extension().is_some_and(|e| e == "csv") {
            validate_csv(&dir.join(rel))?;
            checked += 1;
        }
    }
    Ok(checked)
}
