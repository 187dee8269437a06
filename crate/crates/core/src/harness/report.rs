//! CSV and JSON report writers. Files are written to a temporary file in
//! the target directory and renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{OutputFormat, RunConfig};
use super::run::{Record, RunSummary};
use crate::error::{Error, Result};

pub const CSV_FILE: &str = "stein-audit-report.csv";
pub const JSON_FILE: &str = "stein-audit-report.json";
pub const SUMMARY_FILE: &str = "stein-audit-summary.json";

pub const CSV_COLUMNS: [&str; 11] = [
    "pair_id",
    "check",
    "metric",
    "lhs",
    "kappa",
    "kappa_source",
    "sqrtJ",
    "rhs",
    "slack",
    "verdict",
    "flags",
];

#[derive(Serialize)]
struct JsonReport<'a> {
    config: &'a RunConfig,
    records: &'a [Record],
    summary: &'a RunSummary,
    version: &'static str,
}

/// Shortest round-trip formatting; empty for missing or NaN values.
fn num(v: Option<f64>) -> String {
    match v {
        Some(x) if !x.is_nan() => format!("{x:?}"),
        _ => String::new(),
    }
}

pub fn csv_bytes(records: &[Record]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for r in records {
        w.write_record([
            r.pair_id.clone(),
            r.check.clone(),
            r.metric.clone(),
            num(Some(r.lhs)),
            num(r.kappa),
            r.kappa_source.clone(),
            num(r.sqrt_j),
            num(Some(r.rhs)),
            num(Some(r.slack)),
            r.verdict.id().to_string(),
            r.flags.join(";"),
        ])
        .map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

pub fn json_bytes(config: &RunConfig, records: &[Record], summary: &RunSummary) -> Result<Vec<u8>> {
    let report = JsonReport {
        config,
        records,
        summary,
        version: env!("CARGO_PKG_VERSION"),
    };
    let mut v = serde_json::to_vec_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error.to_string()))?;
    Ok(())
}

/// Writes the report in `format` under `dir`, plus a summary file for CSV
/// output. Returns the paths written.
pub fn emit_report(
    config: &RunConfig,
    records: &[Record],
    summary: &RunSummary,
    dir: &Path,
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::Io("no records to report".into()));
    }
    std::fs::create_dir_all(dir)?;
    match format {
        OutputFormat::Csv => {
            let report = dir.join(CSV_FILE);
            write_atomic(&report, &csv_bytes(records)?)?;
            let summary_path = dir.join(SUMMARY_FILE);
            let mut s = serde_json::to_vec_pretty(summary).map_err(|e| Error::Io(e.to_string()))?;
            s.push(b'\n');
            write_atomic(&summary_path, &s)?;
            Ok(vec![report, summary_path])
        }
        OutputFormat::Json => {
            let report = dir.join(JSON_FILE);
            write_atomic(&report, &json_bytes(config, records, summary)?)?;
            Ok(vec![report])
        }
    }
}
