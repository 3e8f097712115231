use eoslab_core::landscape::{batch_grad, Landscape, LandscapeSpec, NoiseModel};
use eoslab_core::probe::{batch_sharpness, lanczos_options_for, probe_point, LandscapeReport, ProbeOptions};
use eoslab_core::vecmath::{lanczos_top, LanczosOptions, RngStream};
use eoslab_core::{Error, ParamVector};

use crate::config::ExperimentConfig;
use crate::csv::SharpnessRow;
use crate::error::{CliError, Context, Result};

pub(crate) type DynLandscape = Box<dyn Landscape<f64>>;

/// At most this many trace rows per run go to CSV.
pub(crate) const TRACE_ROWS_PER_RUN: usize = 1000;

/// The point where the landscape sits on the stability threshold with no
/// oscillation: `(0, y*, 0…)` on the canonical landscape, the initial
/// parameters of an MLP.
pub(crate) fn reference_point(cfg: &ExperimentConfig) -> Result<ParamVector> {
    match &cfg.landscape {
        LandscapeSpec::Canonical(spec) => Ok(spec.threshold_point(cfg.eta, 0.0)?),
        LandscapeSpec::Mlp(spec) => Ok(spec.build::<f64>()?.initial_params().clone()),
    }
}

/// Start of the SGD and GD runs. On the canonical landscape this is the
/// threshold point with `x = δ`, the period-two cycle of gradient descent.
pub(crate) fn start_point(cfg: &ExperimentConfig, h: &dyn Landscape<f64>) -> Result<ParamVector> {
    match &cfg.landscape {
        LandscapeSpec::Canonical(spec) => {
            let r = reference_report(cfg, h, &mut RngStream::new(cfg.seed, u64::MAX))?;
            Ok(spec.threshold_point(cfg.eta, r.delta)?)
        }
        LandscapeSpec::Mlp(_) => reference_point(cfg),
    }
}

pub(crate) fn reference_report(
    cfg: &ExperimentConfig,
    h: &dyn Landscape<f64>,
    rng: &mut RngStream,
) -> Result<LandscapeReport<f64>> {
    let theta = reference_point(cfg)?;
    probe_point(h, &theta, &ProbeOptions::new(cfg.eta), rng, None).at(|| "probe at the reference point".into())
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Probe {
    pub t: usize,
    pub sharpness: f64,
    /// NaN when not measured.
    pub batch_sharpness: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct Trace {
    pub probes: Vec<Probe>,
    /// Mean iterate over the probes at or after `measure_from`.
    pub mean_iterate: ParamVector,
}

pub(crate) struct TraceSettings {
    pub eta: f64,
    pub noise: NoiseModel,
    pub steps: usize,
    pub probe_every: usize,
    /// First step whose probes enter `mean_iterate` and measure batch sharpness.
    pub measure_from: usize,
    /// Batches per batch-sharpness estimate; `None` skips the measurement.
    pub bs_batches: Option<usize>,
}

/// Runs `θ ← θ − η g_B(θ)` for `steps` steps, probing the sharpness every
/// `probe_every` steps (and at step `steps`).
///
/// `rng.substream(0)` seeds Lanczos, `substream(1)` the mini-batches and
/// `substream(2)` the batch-sharpness batches.
pub(crate) fn sgd_trace(
    h: &dyn Landscape<f64>,
    start: &ParamVector,
    s: &TraceSettings,
    rng: &RngStream,
) -> Result<Trace> {
    let mut lanczos_rng = rng.substream(0);
    let mut noise_rng = rng.substream(1);
    let mut bs_rng = rng.substream(2);
    let opts = lanczos_options_for(h, &LanczosOptions::default());
    let mut theta = start.clone();
    let mut u_prev: Option<ParamVector> = None;
    let mut probes = Vec::with_capacity(s.steps / s.probe_every + 2);
    let mut sum = vec![0.0; h.dim()];
    let mut summed = 0usize;
    for t in 0..=s.steps {
        if t % s.probe_every == 0 || t == s.steps {
            let eig = lanczos_top(|v| h.hvp(&theta, v), h.dim(), &mut lanczos_rng, &opts, u_prev.as_ref())
                .at(|| format!("sharpness probe at step {t}"))?;
            let mut bs = f64::NAN;
            if t >= s.measure_from {
                if let Some(m) = s.bs_batches {
                    bs = batch_sharpness(h, &theta, &s.noise, m, &mut bs_rng)
                        .at(|| format!("batch sharpness at step {t}"))?
                        .mean;
                }
                for (acc, v) in sum.iter_mut().zip(theta.iter()) {
                    *acc += v;
                }
                summed += 1;
            }
            probes.push(Probe {
                t,
                sharpness: eig.value,
                batch_sharpness: bs,
            });
            u_prev = Some(eig.vector);
        }
        if t == s.steps {
            break;
        }
        let bg = batch_grad(h, &theta, &s.noise, &mut noise_rng).at(|| format!("mini-batch gradient at step {t}"))?;
        theta = match theta.axpy(-s.eta, &bg.g_b) {
            Ok(next) => next,
            Err(Error::NonFinite { .. }) => {
                return Err(CliError::AtStep {
                    context: "SGD".into(),
                    source: Error::Diverged { step: t + 1 },
                })
            }
            Err(e) => return Err(e.into()),
        };
    }
    let n = summed.max(1) as f64;
    let mean_iterate = ParamVector::from_vec(sum.into_iter().map(|v| v / n).collect())?;
    Ok(Trace { probes, mean_iterate })
}

impl Trace {
    pub(crate) fn after(&self, from: usize) -> impl Iterator<Item = &Probe> {
        self.probes.iter().filter(move |p| p.t >= from)
    }

    pub(crate) fn series(&self) -> Vec<(usize, f64)> {
        self.probes.iter().map(|p| (p.t, p.sharpness)).collect()
    }

    /// Every `k`-th probe so that at most [`TRACE_ROWS_PER_RUN`] rows remain.
    pub(crate) fn rows(&self, seed: u64, batch_size: u64) -> Vec<SharpnessRow> {
        let stride = self.probes.len().div_ceil(TRACE_ROWS_PER_RUN).max(1);
        self.probes
            .iter()
            .step_by(stride)
            .map(|p| SharpnessRow {
                seed,
                batch_size,
                t: p.t as u64,
                sharpness: p.sharpness,
                batch_sharpness: p.batch_sharpness,
            })
            .collect()
    }
}

/// First step counted as equilibrium.
pub(crate) fn burn_in_step(cfg: &ExperimentConfig) -> usize {
    (cfg.burn_in_fraction * cfg.steps as f64).floor() as usize
}

/// Mean and standard error of the mean (0 for fewer than two values).
pub(crate) fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

/// Means of `blocks` contiguous blocks of `values` (trailing remainder dropped).
pub(crate) fn block_means(values: &[f64], blocks: usize) -> Vec<f64> {
    let len = values.len() / blocks.max(1);
    if len == 0 {
        return Vec::new();
    }
    values
        .chunks_exact(len)
        .take(blocks)
        .map(|c| c.iter().sum::<f64>() / len as f64)
        .collect()
}

/// Formats a list value for summary keys: `4`, `0.5`.
pub(crate) fn key_num(v: f64) -> String {
    v.to_string()
}
