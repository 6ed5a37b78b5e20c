//! CSV tables and JSON sidecars of sweep results.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{Format, RunConfig};
use crate::error::{EstaError, Result};
use crate::experiments::{SweepResult, Threshold};
use crate::schemes::ControlVector;

pub const CSV_HEADER: &str = "t_f,F_sta,F_esta,F_esta_idealized,F_sta_idealized";

/// 17 significant digits; empty for values that were not computed.
fn number(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// Fidelity table, one line per final time.
pub fn csv_string(result: &SweepResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &result.rows {
        let r = row.record.as_ref();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            number(Some(row.t_f)),
            number(r.and_then(|r| r.f_sta)),
            number(r.and_then(|r| r.f_esta)),
            number(r.and_then(|r| r.f_esta_idealized)),
            number(r.and_then(|r| r.f_sta_idealized)),
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarRow {
    pub t_f: f64,
    pub f_sta: Option<f64>,
    pub f_esta: Option<f64>,
    pub f_esta_idealized: Option<f64>,
    pub f_sta_idealized: Option<f64>,
    pub eps: Option<ControlVector>,
    pub f_estimate: Option<f64>,
    pub degenerate: Option<bool>,
    pub grid_points: Vec<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub row_seconds: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub column: String,
    pub level: f64,
    /// `None` when the level is not reached within the sweep.
    pub t_f: Option<f64>,
}

/// Metadata and full results of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub version: String,
    pub config: RunConfig,
    pub rows: Vec<SidecarRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub thresholds: Vec<ThresholdEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl Sidecar {
    pub fn new(config: &RunConfig, result: &SweepResult, total_seconds: f64) -> Self {
        let rows = result
            .rows
            .iter()
            .map(|row| {
                let r = row.record.as_ref();
                SidecarRow {
                    t_f: row.t_f,
                    f_sta: r.and_then(|r| r.f_sta),
                    f_esta: r.and_then(|r| r.f_esta),
                    f_esta_idealized: r.and_then(|r| r.f_esta_idealized),
                    f_sta_idealized: r.and_then(|r| r.f_sta_idealized),
                    eps: r.map(|r| r.eps.clone()),
                    f_estimate: r.map(|r| r.f_estimate),
                    degenerate: r.map(|r| r.degenerate),
                    grid_points: r.map(|r| r.grid_points.clone()).unwrap_or_default(),
                    error: row.error.clone(),
                }
            })
            .collect();
        let timings = config.output.timings.then(|| Timings {
            total_seconds,
            row_seconds: result.rows.iter().map(|r| r.record.as_ref().map(|r| r.seconds)).collect(),
        });
        Sidecar {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            rows,
            thresholds: Vec::new(),
            timings,
        }
    }

    pub fn with_thresholds(mut self, entries: Vec<(String, f64, Threshold)>) -> Self {
        self.thresholds =
            entries.into_iter().map(|(column, level, t)| ThresholdEntry { column, level, t_f: t.time() }).collect();
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sidecar serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| EstaError::config("<root>", e.to_string()))?;
        let config = RunConfig::from_json_value(value.get("config").cloned().unwrap_or_default())?;
        let mut sidecar: Sidecar =
            serde_json::from_value(value).map_err(|e| EstaError::config("<root>", e.to_string()))?;
        sidecar.config = config;
        Ok(sidecar)
    }
}

/// `results.csv` pairs with `results.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| EstaError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Writes the results in the configured format and returns the files
/// written. Without an output path the main table goes to standard output
/// and no sidecar is written.
pub fn emit_results(config: &RunConfig, result: &SweepResult, sidecar: &Sidecar) -> Result<Vec<PathBuf>> {
    let main = match config.output.format {
        Format::Csv => csv_string(result),
        Format::Json => sidecar.to_json(),
    };
    match &config.output.path {
        None => {
            print!("{main}");
            Ok(Vec::new())
        }
        Some(path) => {
            write(path, &main)?;
            let mut written = vec![path.clone()];
            if config.output.format == Format::Csv {
                let side = sidecar_path(path);
                if side != *path {
                    write(&side, &sidecar.to_json())?;
                    written.push(side);
                }
            }
            Ok(written)
        }
    }
}
