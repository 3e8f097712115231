//! CSV output with a fixed schema registry.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which parses back
//! to the identical `f64`. Lines end in `\n`.

use std::fmt::Write as _;
use std::path::Path;

use eoslab_core::probe::{CouplingRecord, LandscapeReport};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Cell::Float(v) => {
                let _ = write!(out, "{v:.16e}");
            }
            Cell::Text(s) => out.push_str(s),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Schema {
    pub id: &'static str,
    pub columns: &'static [&'static str],
}

pub const SCHEMAS: &[Schema] = &[
    Schema {
        id: "reduced-trajectory",
        columns: &["run_id", "t", "x_hat", "x_hat_sq", "y_hat"],
    },
    Schema {
        id: "ref-trajectory",
        columns: &["t", "S", "align", "L", "alpha", "beta", "delta", "epsilon", "kappa"],
    },
    Schema {
        id: "coupling",
        columns: &["t", "norm_v", "norm_vhat", "deviation", "loss_residual", "sharp_residual"],
    },
    Schema {
        id: "scan-summary",
        columns: &["key", "value", "stderr"],
    },
    Schema {
        id: "ensemble-summary",
        columns: &[
            "sigma_u_sq",
            "mean_x_sq",
            "mean_y",
            "var_x_sq",
            "var_y",
            "predicted_mean_y",
            "diverged_runs",
            "samples",
        ],
    },
    Schema {
        id: "sharpness-trace",
        columns: &["seed", "batch_size", "t", "S", "batch_sharpness"],
    },
    Schema {
        id: "noise-scan",
        columns: &["batch_size", "sigma_u_sq", "stderr", "predicted"],
    },
];

pub fn schema(id: &str) -> Option<&'static Schema> {
    SCHEMAS.iter().find(|s| s.id == id)
}

/// A row of named cells, in schema order.
pub trait CsvRecord {
    fn cells(&self) -> Vec<(&'static str, Cell)>;
}

fn check_columns(schema: &Schema, names: &[&str]) -> Result<()> {
    let err = |message: String| CliError::Schema {
        schema: schema.id.to_string(),
        message,
    };
    if let Some(extra) = names.iter().find(|n| !schema.columns.contains(n)) {
        return Err(err(format!("extra column `{extra}`")));
    }
    if let Some(missing) = schema.columns.iter().find(|c| !names.contains(c)) {
        return Err(err(format!("missing column `{missing}`")));
    }
    if names != schema.columns {
        return Err(err(format!("columns out of order: {}", names.join(","))));
    }
    Ok(())
}

/// Renders `records` under `schema_id`.
pub fn render_csv<R: CsvRecord>(records: &[R], schema_id: &str) -> Result<String> {
    let schema = schema(schema_id).ok_or_else(|| CliError::Schema {
        schema: schema_id.to_string(),
        message: "not registered".into(),
    })?;
    let mut out = schema.columns.join(",");
    out.push('\n');
    for r in records {
        let cells = r.cells();
        let names: Vec<&str> = cells.iter().map(|(n, _)| *n).collect();
        check_columns(schema, &names)?;
        for (i, (_, c)) in cells.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            c.render(&mut out);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the CSV and returns the SHA-256 of its bytes.
pub fn emit_csv<R: CsvRecord>(records: &[R], schema_id: &str, path: &Path) -> Result<String> {
    let text = render_csv(records, schema_id)?;
    std::fs::write(path, text.as_bytes()).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(text.as_bytes()))
}

/// Header and raw rows of a CSV file written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .map(|h| h.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    Ok((header, rows))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub run_id: u64,
    pub t: u64,
    pub x_hat: f64,
    pub y_hat: f64,
}

impl CsvRecord for TrajectoryRow {
    fn cells(&self) -> Vec<(&'static str, Cell)> {
        vec![
            ("run_id", Cell::Int(self.run_id)),
            ("t", Cell::Int(self.t)),
            ("x_hat", Cell::Float(self.x_hat)),
            ("x_hat_sq", Cell::Float(self.x_hat * self.x_hat)),
            ("y_hat", Cell::Float(self.y_hat)),
        ]
    }
}

/// One reference-trajectory point.
pub struct RefRow<'a> {
    pub t: u64,
    pub report: &'a LandscapeReport<f64>,
}

impl CsvRecord for RefRow<'_> {
    fn cells(&self) -> Vec<(&'static str, Cell)> {
        let r = self.report;
        vec![
            ("t", Cell::Int(self.t)),
            ("S", Cell::Float(r.sharpness)),
            ("align", Cell::Float(r.align())),
            ("L", Cell::Float(r.loss)),
            ("alpha", Cell::Float(r.alpha)),
            ("beta", Cell::Float(r.beta)),
            ("delta", Cell::Float(r.delta)),
            ("epsilon", Cell::Float(r.epsilon)),
            ("kappa", Cell::Float(r.kappa)),
        ]
    }
}

impl CsvRecord for CouplingRecord<f64> {
    fn cells(&self) -> Vec<(&'static str, Cell)> {
        vec![
            ("t", Cell::Int(self.t as u64)),
            ("norm_v", Cell::Float(self.norm_v)),
            ("norm_vhat", Cell::Float(self.norm_vhat)),
            ("deviation", Cell::Float(self.deviation)),
            ("loss_residual", Cell::Float(self.loss_residual)),
            ("sharp_residual", Cell::Float(self.sharp_residual)),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub key: String,
    pub value: f64,
    pub stderr: f64,
}

impl SummaryRow {
    pub fn new(key: impl Into<String>, value: f64, stderr: f64) -> Self {
        Self {
            key: key.into(),
            value,
            stderr,
        }
    }

    /// A row without an uncertainty estimate (stderr 0).
    pub fn exact(key: impl Into<String>, value: f64) -> Self {
        Self::new(key, value, 0.0)
    }
}

impl CsvRecord for SummaryRow {
    fn cells(&self) -> Vec<(&'static str, Cell)> {
        vec![
            ("key", Cell::Text(self.key.clone())),
            ("value", Cell::Float(self.value)),
            ("stderr", Cell::Float(self.stderr)),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSummaryRow {
    pub sigma_u_sq: f64,
    pub mean_x_sq: f64,
    pub mean_y: f64,
    pub var_x_sq: f64,
    pub var_y: f64,
    pub predicted_mean_y: f64,
    pub diverged_runs: u64,
    pub samples: u64,
}

impl CsvRecord for EnsembleSummaryRow {
    fn cells(&self) -> Vec<(&'static str, Cell)> {
        vec![
            ("sigma_u_sq", Cell::Float(self.sigma_u_sq)),
            ("mean_x_sq", Cell::Float(self.mean_x_sq)),
            ("mean_y", Cell::Float(self.mean_y)),
            ("var_x_sq", Cell::Float(self.var_x_sq)),
            ("var_y", Cell::Float(self.var_y)),
            ("predicted_mean_y", Cell::Float(self.predicted_mean_y)),
            ("diverged_runs", Cell::Int(self.diverged_runs)),
            ("samples", Cell::Int(self.samples)),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SharpnessRow {
    pub seed: u64,
    /// 0 for full-batch gradient descent.
    pub batch_size: u64,
    pub t: u64,
    pub sharpness: f64,
    /// NaN when not measured.
    pub batch_sharpness: f64,
}

impl CsvRecord for SharpnessRow {
    fn cells(&self) -> Vec<(&'static str, Cell)> {
        vec![
            ("seed", Cell::Int(self.seed)),
            ("batch_size", Cell::Int(self.batch_size)),
            ("t", Cell::Int(self.t)),
            ("S", Cell::Float(self.sharpness)),
            ("batch_sharpness", Cell::Float(self.batch_sharpness)),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseScanRow {
    pub batch_size: u64,
    pub sigma_u_sq: f64,
    pub stderr: f64,
    /// `uᵀΣ̂₁u / b` from the exact per-sample covariance.
    pub predicted: f64,
}

impl CsvRecord for NoiseScanRow {
    fn cells(&self) -> Vec<(&'static str, Cell)> {
        vec![
            ("batch_size", Cell::Int(self.batch_size)),
            ("sigma_u_sq", Cell::Float(self.sigma_u_sq)),
            ("stderr", Cell::Float(self.stderr)),
            ("predicted", Cell::Float(self.predicted)),
        ]
    }
}
