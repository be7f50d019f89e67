//! CSV tables and JSON run summaries.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::CliError;
use crate::measure::{CriticalKind, CriticalPointEstimate};

pub const SCHEMA_VERSION: u32 = 1;

/// 17 significant digits, enough to round-trip any `f64`; `NaN` marks undefined.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    fmt_float(x.unwrap_or(f64::NAN))
}

/// A header and rows of already formatted cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let io = |e: csv::Error| CliError::Compute(format!("writing {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush()
            .map_err(|e| CliError::Compute(format!("writing {}: {e}", path.display())))
    }

    /// Rows as JSON arrays of numbers (`null` for NaN).
    pub fn json_rows(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                serde_json::Value::Array(
                    r.iter()
                        .map(|c| match c.parse::<f64>() {
                            Ok(v) if v.is_finite() => serde_json::json!(v),
                            _ => serde_json::Value::Null,
                        })
                        .collect(),
                )
            })
            .collect();
        serde_json::json!({ "columns": self.header, "rows": rows })
    }
}

/// Reads a CSV table written by this tool as `(header, numeric rows)`.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let err = |e: String| CliError::Compute(format!("reading {}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let header = r
        .headers()
        .map_err(|e| err(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        rows.push(
            rec.iter()
                .map(|c| c.parse::<f64>().map_err(|e| err(format!("'{c}': {e}"))))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok((header, rows))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub code_version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl Metadata {
    pub fn now() -> Self {
        Self {
            code_version: env!("CARGO_PKG_VERSION").into(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointRecord {
    pub location: f64,
    pub value: Option<f64>,
    pub resolution: f64,
    pub kind: String,
}

impl From<&CriticalPointEstimate<f64>> for CriticalPointRecord {
    fn from(c: &CriticalPointEstimate<f64>) -> Self {
        Self {
            location: c.location,
            value: c.value,
            resolution: c.resolution,
            kind: match c.kind {
                CriticalKind::Peak => "peak",
                CriticalKind::Divergent => "divergent",
                CriticalKind::ChernChange => "chern-change",
            }
            .into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub metadata: Metadata,
    pub results: serde_json::Value,
    pub critical_points: Vec<CriticalPointRecord>,
    pub warnings: Vec<String>,
}

impl Summary {
    pub fn path(out: &Path, command: &str) -> PathBuf {
        out.join(format!("{command}_summary.json"))
    }

    pub fn write(&self, out: &Path) -> Result<PathBuf, CliError> {
        let path = Self::path(out, &self.command);
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Compute(e.to_string()))?;
        std::fs::write(&path, text + "\n")
            .map_err(|e| CliError::Compute(format!("writing {}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Compute(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Compute(format!("{}: {e}", path.display())))
    }
}
