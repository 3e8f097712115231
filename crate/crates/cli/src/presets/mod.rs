//! Named experiments. Each preset writes its own CSVs plus `summary.csv`
//! (scan-summary schema) and reports pass/fail checks against its acceptance
//! thresholds.

mod common;
mod coupling;
mod ensembles;
mod scans;

use std::path::{Path, PathBuf};
use std::time::Instant;

use eoslab_core::landscape::{CanonicalCubicSpec, LandscapeSpec, NoiseSubspace};

use crate::config::ExperimentConfig;
use crate::csv::{emit_csv, CsvRecord, SummaryRow};
use crate::error::{CliError, Result};
use crate::manifest::RunManifest;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    FigSde,
    GapScanBatch,
    NoiseScan,
    Coupling,
    Decorrelation,
    BatchSharpness,
    GdBaseline,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::FigSde,
        Preset::GapScanBatch,
        Preset::NoiseScan,
        Preset::Coupling,
        Preset::Decorrelation,
        Preset::BatchSharpness,
        Preset::GdBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::FigSde => "fig-sde",
            Preset::GapScanBatch => "gap-scan-batch",
            Preset::NoiseScan => "noise-scan",
            Preset::Coupling => "coupling",
            Preset::Decorrelation => "decorrelation",
            Preset::BatchSharpness => "batch-sharpness",
            Preset::GdBaseline => "gd-baseline",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    /// Desk-scale defaults for this preset.
    pub fn default_config(self) -> ExperimentConfig {
        let mut c = ExperimentConfig::base(self);
        match self {
            Preset::FigSde => {}
            Preset::Decorrelation => c.sigma_list = vec![4.0, 10.0, 40.0],
            Preset::GapScanBatch => {
                c.landscape = LandscapeSpec::Canonical(noisy_canonical());
                c.steps = 300_000;
            }
            Preset::NoiseScan => {
                c.landscape = LandscapeSpec::Canonical(noisy_canonical());
                c.runs = 10;
            }
            Preset::BatchSharpness => {
                c.landscape = LandscapeSpec::Canonical(CanonicalCubicSpec {
                    noise_subspace: NoiseSubspace::Top,
                    ..noisy_canonical()
                });
                c.batch_sizes = vec![8];
                c.steps = 100_000;
                c.m_batches = 30;
            }
            Preset::GdBaseline => {
                c.batch_sizes = Vec::new();
                c.steps = 20_000;
            }
            Preset::Coupling => {
                c.landscape = LandscapeSpec::Canonical(CanonicalCubicSpec {
                    h0: 200.0,
                    mu: 0.05,
                    ..CanonicalCubicSpec::default()
                });
                c.batch_sizes = Vec::new();
            }
        }
        c
    }
}

/// Canonical landscape with per-sample noise of variance 320 per direction.
fn noisy_canonical() -> CanonicalCubicSpec {
    CanonicalCubicSpec {
        noise_cov_scale: 320f64.sqrt(),
        ..CanonicalCubicSpec::default()
    }
}

/// One acceptance threshold evaluated by a preset.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub(crate) fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// CSV files written so far with their checksums, in write order.
pub(crate) struct Outputs {
    dir: PathBuf,
    pub(crate) files: Vec<(String, String)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub(crate) fn emit<R: CsvRecord>(&mut self, name: &str, records: &[R], schema_id: &str) -> Result<()> {
        let sum = emit_csv(records, schema_id, &self.dir.join(name))?;
        self.files.push((name.to_string(), sum));
        Ok(())
    }
}

/// What a preset produced: its summary rows and checks.
#[derive(Clone, Debug, Default)]
pub struct PresetOutcome {
    pub summary: Vec<SummaryRow>,
    pub checks: Vec<Check>,
}

impl PresetOutcome {
    pub(crate) fn row(&mut self, row: SummaryRow) {
        self.summary.push(row);
    }

    pub(crate) fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, passed, detail));
    }

    pub fn value(&self, key: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.key == key)
    }
}

/// Runs the configured preset, writes its CSVs and `summary.csv`, then the
/// manifest.
pub fn run_preset(config: &ExperimentConfig) -> Result<(RunManifest, PresetOutcome)> {
    config.validate()?;
    let started = Instant::now();
    std::fs::create_dir_all(&config.out_dir).map_err(|e| CliError::io(&config.out_dir, e))?;
    let mut out = Outputs::new(&config.out_dir);
    let outcome = match config.preset {
        Preset::FigSde => ensembles::fig_sde(config, &mut out)?,
        Preset::Decorrelation => ensembles::decorrelation(config, &mut out)?,
        Preset::GapScanBatch => scans::gap_scan(config, &mut out)?,
        Preset::NoiseScan => scans::noise_scan(config, &mut out)?,
        Preset::BatchSharpness => scans::batch_sharpness_scan(config, &mut out)?,
        Preset::GdBaseline => scans::gd_baseline(config, &mut out)?,
        Preset::Coupling => coupling::coupling_study(config, &mut out)?,
    };
    out.emit("summary.csv", &outcome.summary, "scan-summary")?;
    let manifest = RunManifest {
        config_text: config.to_text(),
        version: crate::manifest::VERSION.to_string(),
        outputs: out.files,
        duration_secs: started.elapsed().as_secs_f64(),
        checks: outcome.checks.clone(),
    };
    manifest.write(&config.out_dir)?;
    Ok((manifest, outcome))
}
