//! Flat `key = value` experiment configuration with one `[landscape]` block.
//!
//! ```text
//! preset = fig-sde
//! eta = 0.01
//! sigma_list = 0, 4, 10
//!
//! [landscape]
//! kind = canonical
//! h0 = 180
//! ```
//!
//! Keys missing from a file take the preset's defaults. `#` starts a comment.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use eoslab_core::landscape::{CanonicalCubicSpec, LandscapeSpec, Sampling};

use crate::error::{CliError, Result};
use crate::presets::Preset;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub landscape: LandscapeSpec,
    pub eta: f64,
    pub batch_sizes: Vec<usize>,
    pub sigma_list: Vec<f64>,
    /// Ensemble size, or repeated estimates per batch size in the noise scan.
    pub runs: usize,
    pub steps: usize,
    pub burn_in_fraction: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Probe the sharpness every this many SGD steps.
    pub probe_every: usize,
    /// Independent seeds per batch size in the SGD scans.
    pub seeds: usize,
    /// Mini-batches per noise-variance or batch-sharpness estimate.
    pub m_batches: usize,
    pub sampling: Sampling,
    /// Frozen coefficients of the scalar recursion.
    pub beta: f64,
    pub delta_sq: f64,
    pub kappa: f64,
    pub x0: f64,
    pub y0: f64,
    /// Coupling study: values of the landscape's `alpha0`.
    pub alpha0_list: Vec<f64>,
    /// Coupling horizon is `round(horizon_factor / ε)` steps.
    pub horizon_factor: f64,
    /// Coupling start displacement in units of `δ`.
    pub perturb: f64,
    /// Runs per noise level written to trajectory CSVs.
    pub dump_runs: usize,
}

impl ExperimentConfig {
    /// Baseline shared by every preset before preset-specific overrides.
    pub(crate) fn base(preset: Preset) -> Self {
        Self {
            preset,
            landscape: LandscapeSpec::Canonical(CanonicalCubicSpec::default()),
            eta: 0.01,
            batch_sizes: vec![8, 16, 32, 64, 128],
            sigma_list: vec![0.0, 4.0, 10.0, 20.0, 40.0],
            runs: 100,
            steps: 5000,
            burn_in_fraction: 0.3,
            seed: 0,
            out_dir: PathBuf::from(format!("out/{}", preset.name())),
            probe_every: 10,
            seeds: 3,
            m_batches: 200,
            sampling: Sampling::WithReplacement,
            beta: 1.0,
            delta_sq: 0.5,
            kappa: 0.0,
            x0: 1.0,
            y0: 0.0,
            alpha0_list: vec![0.25, 0.0625, 0.015625],
            horizon_factor: 4.0,
            perturb: 0.5,
            dump_runs: 2,
        }
    }

    pub fn for_preset(preset: Preset) -> Self {
        preset.default_config()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(CliError::Invalid(msg.to_string()));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be positive");
        }
        if self.runs == 0 || self.steps == 0 || self.probe_every == 0 || self.seeds == 0 {
            return bad("runs, steps, probe_every and seeds must be positive");
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return bad("burn_in_fraction must lie in [0, 1)");
        }
        if self.m_batches < 2 {
            return bad("m_batches must be at least 2");
        }
        if self.batch_sizes.iter().any(|&b| b == 0) {
            return bad("batch sizes must be positive");
        }
        if self.sigma_list.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return bad("sigma_list entries must be non-negative");
        }
        if !(self.beta > 0.0 && self.delta_sq > 0.0) {
            return bad("beta and delta_sq must be positive");
        }
        if self.alpha0_list.iter().any(|&a| !(a > 0.0)) {
            return bad("alpha0_list entries must be positive");
        }
        if !(self.horizon_factor > 0.0 && self.perturb.is_finite()) {
            return bad("horizon_factor must be positive");
        }
        self.landscape.build::<f64>()?;
        Ok(())
    }

    fn top_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("preset", self.preset.name().to_string()),
            ("eta", self.eta.to_string()),
            ("batch_sizes", join(&self.batch_sizes)),
            ("sigma_list", join(&self.sigma_list)),
            ("runs", self.runs.to_string()),
            ("steps", self.steps.to_string()),
            ("burn_in_fraction", self.burn_in_fraction.to_string()),
            ("seed", self.seed.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("probe_every", self.probe_every.to_string()),
            ("seeds", self.seeds.to_string()),
            ("m_batches", self.m_batches.to_string()),
            ("sampling", self.sampling.name().to_string()),
            ("beta", self.beta.to_string()),
            ("delta_sq", self.delta_sq.to_string()),
            ("kappa", self.kappa.to_string()),
            ("x0", self.x0.to_string()),
            ("y0", self.y0.to_string()),
            ("alpha0_list", join(&self.alpha0_list)),
            ("horizon_factor", self.horizon_factor.to_string()),
            ("perturb", self.perturb.to_string()),
            ("dump_runs", self.dump_runs.to_string()),
        ]
    }

    /// Full text form; parsing it back yields an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.top_pairs() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out.push_str("\n[landscape]\n");
        for (k, v) in self.landscape.to_pairs() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Parses a config file. `preset_override` replaces the file's `preset`
    /// key; one of the two must be present.
    pub fn from_text(text: &str, preset_override: Option<Preset>) -> Result<Self> {
        let mut top: Vec<(usize, String, String)> = Vec::new();
        let mut land: Vec<(String, String)> = Vec::new();
        let mut in_landscape = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if line == "[landscape]" && !in_landscape {
                    in_landscape = true;
                    continue;
                }
                return Err(CliError::Config {
                    line: line_no,
                    message: format!("unexpected section `{line}`"),
                });
            }
            let (k, v) = line.split_once('=').ok_or_else(|| CliError::Config {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if in_landscape {
                land.push((k, v));
            } else {
                top.push((line_no, k, v));
            }
        }

        let file_preset = top.iter().find(|(_, k, _)| k == "preset");
        let preset = match (preset_override, file_preset) {
            (Some(p), _) => p,
            (None, Some((line, _, v))) => Preset::from_name(v).ok_or_else(|| CliError::Config {
                line: *line,
                message: format!("unknown preset `{v}`"),
            })?,
            (None, None) => return Err(CliError::Invalid("no preset given in config or on the command line".into())),
        };
        let mut cfg = preset.default_config();
        for (line, k, v) in &top {
            cfg.apply(k, v).map_err(|message| CliError::Config { line: *line, message })?;
        }
        if !land.is_empty() {
            let kind = land.iter().find(|(k, _)| k == "kind").map(|(_, v)| v.as_str());
            let mut pairs: Vec<(String, String)> = match kind {
                Some(k) if k != cfg.landscape.kind() => Vec::new(),
                _ => cfg
                    .landscape
                    .to_pairs()
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            };
            for (k, v) in land {
                match pairs.iter_mut().find(|(pk, _)| *pk == k) {
                    Some(slot) => slot.1 = v,
                    None => pairs.push((k, v)),
                }
            }
            cfg.landscape = LandscapeSpec::from_pairs(&pairs)?;
        }
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "preset" => {}
            "eta" => self.eta = parse(key, value)?,
            "batch_sizes" => self.batch_sizes = parse_list(key, value)?,
            "sigma_list" => self.sigma_list = parse_list(key, value)?,
            "runs" => self.runs = parse(key, value)?,
            "steps" => self.steps = parse(key, value)?,
            "burn_in_fraction" => self.burn_in_fraction = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "probe_every" => self.probe_every = parse(key, value)?,
            "seeds" => self.seeds = parse(key, value)?,
            "m_batches" => self.m_batches = parse(key, value)?,
            "sampling" => {
                self.sampling = Sampling::from_name(value).ok_or_else(|| format!("unknown sampling `{value}`"))?
            }
            "beta" => self.beta = parse(key, value)?,
            "delta_sq" => self.delta_sq = parse(key, value)?,
            "kappa" => self.kappa = parse(key, value)?,
            "x0" => self.x0 = parse(key, value)?,
            "y0" => self.y0 = parse(key, value)?,
            "alpha0_list" => self.alpha0_list = parse_list(key, value)?,
            "horizon_factor" => self.horizon_factor = parse(key, value)?,
            "perturb" => self.perturb = parse(key, value)?,
            "dump_runs" => self.dump_runs = parse(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }
}

fn join<V: ToString>(values: &[V]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn parse<V: FromStr>(key: &str, value: &str) -> std::result::Result<V, String> {
    value.parse().map_err(|_| format!("cannot parse `{key} = {value}`"))
}

fn parse_list<V: FromStr>(key: &str, value: &str) -> std::result::Result<Vec<V>, String> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}
