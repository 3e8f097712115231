//! SGD and GD presets on a full landscape: gap scan, noise scan, batch
//! sharpness and the GD baseline.

use rayon::prelude::*;

use eoslab_core::landscape::{Landscape, LandscapeSpec, NoiseModel};
use eoslab_core::predicted::equilibrium_gap;
use eoslab_core::probe::{
    equilibrium_sharpness, power_law_fit, probe_point, projected_noise_variance, ProbeOptions,
};
use eoslab_core::refpath::{RefTrajectory, StableSetSpec};
use eoslab_core::vecmath::RngStream;
use eoslab_core::ParamVector;

use super::common::{
    block_means, burn_in_step, mean_se, reference_point, reference_report, sgd_trace, start_point, DynLandscape,
    Trace, TraceSettings,
};
use super::{Outputs, PresetOutcome};
use crate::config::ExperimentConfig;
use crate::csv::{NoiseScanRow, RefRow, SharpnessRow, SummaryRow};
use crate::error::{CliError, Context, Result};

/// Blocks per run for batch-means standard errors.
const BLOCKS_PER_RUN: usize = 10;

/// Reference-trajectory length written by the GD baseline.
const REF_STEPS: usize = 200;

fn noise_for(cfg: &ExperimentConfig, h: &dyn Landscape<f64>, b: usize) -> Result<NoiseModel> {
    let noise = NoiseModel::new(b, cfg.sampling);
    noise.validate(h.n_samples())?;
    Ok(noise)
}

fn settings(cfg: &ExperimentConfig, noise: NoiseModel, bs_batches: Option<usize>) -> TraceSettings {
    TraceSettings {
        eta: cfg.eta,
        noise,
        steps: cfg.steps,
        probe_every: cfg.probe_every,
        measure_from: burn_in_step(cfg),
        bs_batches,
    }
}

fn gd_trace(cfg: &ExperimentConfig, h: &dyn Landscape<f64>, start: &ParamVector) -> Result<Trace> {
    let noise = NoiseModel::full_batch(h.n_samples());
    sgd_trace(h, start, &settings(cfg, noise, None), &RngStream::new(cfg.seed, 1))
}

/// SGD runs for every `(batch size, seed)` pair, in parallel. Results are in
/// `batch_sizes × seeds` order.
fn sgd_runs(
    cfg: &ExperimentConfig,
    h: &DynLandscape,
    start: &ParamVector,
    bs_batches: Option<usize>,
) -> Result<Vec<(usize, usize, Trace)>> {
    let base = RngStream::new(cfg.seed, 2);
    let jobs: Vec<(usize, usize)> = cfg
        .batch_sizes
        .iter()
        .flat_map(|&b| (0..cfg.seeds).map(move |s| (b, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(b, s)| {
            let noise = noise_for(cfg, h.as_ref(), b)?;
            let rng = base.substream(b as u64).substream(s as u64);
            let trace = sgd_trace(h.as_ref(), start, &settings(cfg, noise, bs_batches), &rng).map_err(|e| {
                CliError::Invalid(format!("SGD run with batch size {b}, seed {s}: {e}"))
            })?;
            Ok((b, s, trace))
        })
        .collect()
}

fn trace_rows(gd: &Trace, runs: &[(usize, usize, Trace)]) -> Vec<SharpnessRow> {
    let mut rows = gd.rows(0, 0);
    for (b, s, tr) in runs {
        rows.extend(tr.rows(*s as u64, *b as u64));
    }
    rows
}

pub(crate) fn gap_scan(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<PresetOutcome> {
    let h = cfg.landscape.build::<f64>()?;
    let start = start_point(cfg, h.as_ref())?;
    let burn = burn_in_step(cfg);
    let mut probe_rng = RngStream::new(cfg.seed, 3);
    let reference = reference_report(cfg, h.as_ref(), &mut probe_rng)?;
    let gd = gd_trace(cfg, h.as_ref(), &start)?;
    let s_gd = equilibrium_sharpness(&gd.series())?;
    let runs = sgd_runs(cfg, &h, &start, None)?;

    let mut outcome = PresetOutcome::default();
    outcome.row(SummaryRow::exact("S_gd", s_gd));
    outcome.row(SummaryRow::exact("alpha_ref", reference.alpha));
    outcome.row(SummaryRow::exact("beta_ref", reference.beta));
    let mut points = Vec::new();
    for &b in &cfg.batch_sizes {
        let mine: Vec<&(usize, usize, Trace)> = runs.iter().filter(|r| r.0 == b).collect();
        let per_seed: Vec<f64> = mine
            .iter()
            .map(|(_, _, tr)| {
                let v: Vec<f64> = tr.after(burn).map(|p| p.sharpness).collect();
                mean_se(&v).0
            })
            .collect();
        let (s_sgd, se) = mean_se(&per_seed);
        let gap = s_gd - s_sgd;
        points.push((b as f64, gap));

        let noise = noise_for(cfg, h.as_ref(), b)?;
        let var = projected_noise_variance(
            h.as_ref(),
            &reference.at,
            &reference.u,
            &noise,
            cfg.m_batches,
            &mut probe_rng,
        )?;
        let predicted = equilibrium_gap(cfg.eta, reference.beta, reference.alpha, var.value).unwrap_or(f64::NAN);

        // Landscape parameters at the seed-averaged mean SGD iterate.
        let mut mean_iter = vec![0.0; h.dim()];
        for (_, _, tr) in &mine {
            for (acc, v) in mean_iter.iter_mut().zip(tr.mean_iterate.iter()) {
                *acc += v / mine.len() as f64;
            }
        }
        let at_mean = probe_point(
            h.as_ref(),
            &ParamVector::from_vec(mean_iter)?,
            &ProbeOptions::new(cfg.eta),
            &mut probe_rng,
            Some(&reference.u),
        )?;
        let predicted_mean =
            equilibrium_gap(cfg.eta, at_mean.beta, at_mean.alpha, var.value).unwrap_or(f64::NAN);

        outcome.row(SummaryRow::new(format!("S_sgd.b={b}"), s_sgd, se));
        outcome.row(SummaryRow::new(format!("gap.b={b}"), gap, se));
        outcome.row(SummaryRow::exact(format!("sigma_u_sq.b={b}"), var.value));
        outcome.row(SummaryRow::exact(format!("predicted_gap.b={b}"), predicted));
        outcome.row(SummaryRow::exact(format!("predicted_gap_at_mean_iterate.b={b}"), predicted_mean));
    }
    out.emit("sharpness-trace.csv", &trace_rows(&gd, &runs), "sharpness-trace")?;

    let positive = points.iter().all(|p| p.1 > 0.0);
    let decreasing = points.windows(2).all(|w| w[1].1 < w[0].1);
    let gaps = points.iter().map(|p| format!("{:.4}", p.1)).collect::<Vec<_>>().join(", ");
    outcome.check("gap_positive", positive, format!("gaps by batch size: {gaps}"));
    outcome.check("gap_decreasing", decreasing, format!("gaps by batch size: {gaps}"));
    match power_law_fit(&points) {
        Ok(fit) if positive => {
            outcome.row(SummaryRow::exact("slope", fit.slope));
            outcome.row(SummaryRow::exact("intercept", fit.intercept));
            outcome.row(SummaryRow::exact("r2", fit.r2));
            outcome.check(
                "gap_slope",
                (-1.3..=-0.7).contains(&fit.slope),
                format!("slope {:.4} (limits [-1.3, -0.7])", fit.slope),
            );
            outcome.check("gap_r2", fit.r2 >= 0.9, format!("r2 {:.4} (limit 0.9)", fit.r2));
        }
        _ => {
            outcome.check("gap_slope", false, "no power-law fit: a gap is not positive");
            outcome.check("gap_r2", false, "no power-law fit: a gap is not positive");
        }
    }
    Ok(outcome)
}

pub(crate) fn noise_scan(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<PresetOutcome> {
    let h = cfg.landscape.build::<f64>()?;
    let report = reference_report(cfg, h.as_ref(), &mut RngStream::new(cfg.seed, 3))?;
    let (theta, u) = (&report.at, &report.u);
    let n = h.n_samples();
    // uᵀ Σ̂₁ u with Σ̂₁ the per-sample covariance of the gradient.
    let mut per_sample = 0.0;
    for i in 0..n {
        let d = h.sample_deviation(theta, &report.grad, i)?.dot(u)?;
        per_sample += d * d;
    }
    per_sample /= n as f64;

    let base = RngStream::new(cfg.seed, 4);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &b in &cfg.batch_sizes {
        let noise = noise_for(cfg, h.as_ref(), b)?;
        let estimates: Vec<f64> = (0..cfg.runs)
            .into_par_iter()
            .map(|r| {
                let mut rng = base.substream(b as u64).substream(r as u64);
                projected_noise_variance(h.as_ref(), theta, u, &noise, cfg.m_batches, &mut rng).map(|v| v.value)
            })
            .collect::<eoslab_core::Result<_>>()
            .at(|| format!("noise variance at batch size {b}"))?;
        let (mean, se) = mean_se(&estimates);
        rows.push(NoiseScanRow {
            batch_size: b as u64,
            sigma_u_sq: mean,
            stderr: se,
            predicted: per_sample / b as f64,
        });
        points.push((b as f64, mean));
    }
    out.emit("noise-scan.csv", &rows, "noise-scan")?;

    let mut outcome = PresetOutcome::default();
    outcome.row(SummaryRow::exact("per_sample_variance", per_sample));
    for r in &rows {
        outcome.row(SummaryRow::new(format!("sigma_u_sq.b={}", r.batch_size), r.sigma_u_sq, r.stderr));
    }
    let fit = power_law_fit(&points)?;
    outcome.row(SummaryRow::exact("slope", fit.slope));
    outcome.row(SummaryRow::exact("intercept", fit.intercept));
    outcome.row(SummaryRow::exact("r2", fit.r2));
    outcome.check(
        "noise_slope",
        (fit.slope + 1.0).abs() <= 0.05,
        format!("slope {:.4} (limits [-1.05, -0.95])", fit.slope),
    );
    outcome.check("noise_r2", fit.r2 >= 0.99, format!("r2 {:.5} (limit 0.99)", fit.r2));
    Ok(outcome)
}

pub(crate) fn batch_sharpness_scan(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<PresetOutcome> {
    let h = cfg.landscape.build::<f64>()?;
    let start = start_point(cfg, h.as_ref())?;
    let burn = burn_in_step(cfg);
    let threshold = 2.0 / cfg.eta;
    let gd = gd_trace(cfg, h.as_ref(), &start)?;
    let gd_vals: Vec<f64> = gd.after(burn).map(|p| p.sharpness).collect();
    let (s_gd, se_gd) = mean_se(&block_means(&gd_vals, BLOCKS_PER_RUN));
    let runs = sgd_runs(cfg, &h, &start, Some(cfg.m_batches))?;

    let mut outcome = PresetOutcome::default();
    outcome.row(SummaryRow::new("S_gd", s_gd, se_gd));
    let mut first = true;
    let mut sizes = cfg.batch_sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    for b in sizes {
        let mut s_blocks = Vec::new();
        let mut bs_blocks = Vec::new();
        for (_, _, tr) in runs.iter().filter(|r| r.0 == b) {
            let s: Vec<f64> = tr.after(burn).map(|p| p.sharpness).collect();
            let bs: Vec<f64> = tr.after(burn).map(|p| p.batch_sharpness).collect();
            s_blocks.extend(block_means(&s, BLOCKS_PER_RUN));
            bs_blocks.extend(block_means(&bs, BLOCKS_PER_RUN));
        }
        let (s_sgd, se_s) = mean_se(&s_blocks);
        let (bs, se_bs) = mean_se(&bs_blocks);
        let pooled = (se_s * se_s + se_gd * se_gd).sqrt();
        let gap = s_gd - s_sgd;
        outcome.row(SummaryRow::new(format!("batch_sharpness.b={b}"), bs, se_bs));
        outcome.row(SummaryRow::new(format!("S_sgd.b={b}"), s_sgd, se_s));
        outcome.row(SummaryRow::new(format!("gap.b={b}"), gap, pooled));
        if first {
            first = false;
            let rel = (bs - threshold).abs() / threshold;
            outcome.check(
                "batch_sharpness_at_threshold",
                rel <= 0.1,
                format!("b={b}: batch sharpness {bs:.3} vs 2/eta {threshold:.3}, relative {rel:.4} (limit 0.1)"),
            );
            outcome.check(
                "sharpness_below_gd",
                gap >= 3.0 * pooled,
                format!("b={b}: S_gd - S_sgd = {gap:.4}, pooled stderr {pooled:.4}, ratio {:.2} (limit 3)", gap / pooled),
            );
        }
    }
    out.emit("sharpness-trace.csv", &trace_rows(&gd, &runs), "sharpness-trace")?;
    Ok(outcome)
}

/// Start of the written reference trajectory: below the threshold in `y` and
/// off the bulk minimum, so the sharpness constraint becomes active partway.
fn ref_start(cfg: &ExperimentConfig) -> Result<ParamVector> {
    let theta = reference_point(cfg)?;
    match &cfg.landscape {
        LandscapeSpec::Canonical(_) => {
            let mut v = theta.into_vec();
            v[1] -= 0.25;
            for z in v.iter_mut().skip(2) {
                *z = 0.5;
            }
            Ok(ParamVector::from_vec(v)?)
        }
        LandscapeSpec::Mlp(_) => Ok(theta),
    }
}

pub(crate) fn gd_baseline(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<PresetOutcome> {
    let h = cfg.landscape.build::<f64>()?;
    let start = start_point(cfg, h.as_ref())?;
    let threshold = 2.0 / cfg.eta;
    let gd = gd_trace(cfg, h.as_ref(), &start)?;
    let s_eq = equilibrium_sharpness(&gd.series())?;
    out.emit("sharpness-trace.csv", &gd.rows(0, 0), "sharpness-trace")?;

    let spec = StableSetSpec::new(cfg.eta);
    let mut rng = RngStream::new(cfg.seed, 5);
    let mut traj = RefTrajectory::start(h.as_ref(), &ref_start(cfg)?, spec, ProbeOptions::new(cfg.eta), &mut rng)
        .at(|| "reference trajectory start".into())?;
    for t in 0..REF_STEPS {
        traj.advance(h.as_ref(), &mut rng).at(|| format!("reference step {t}"))?;
    }
    let rows: Vec<RefRow> = traj
        .reports
        .iter()
        .enumerate()
        .map(|(t, report)| RefRow { t: t as u64, report })
        .collect();
    out.emit("ref-trajectory.csv", &rows, "ref-trajectory")?;

    let first_active = traj.steps.iter().position(|s| s.active).map(|i| i + 1);
    let worst_sharp = first_active
        .map(|i| {
            traj.reports[i..]
                .iter()
                .map(|r| (r.sharpness - threshold).abs())
                .fold(0.0, f64::max)
        })
        .unwrap_or(f64::NAN);
    let loss_rise = traj
        .reports
        .windows(2)
        .map(|w| w[1].loss - w[0].loss)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut outcome = PresetOutcome::default();
    outcome.row(SummaryRow::exact("S_gd", s_eq));
    outcome.row(SummaryRow::exact("threshold", threshold));
    outcome.row(SummaryRow::exact("relative_excess", s_eq / threshold - 1.0));
    outcome.row(SummaryRow::exact("ref_first_active_step", first_active.map_or(f64::NAN, |i| i as f64)));
    outcome.row(SummaryRow::exact("ref_max_sharpness_error", worst_sharp));
    outcome.row(SummaryRow::exact("ref_max_loss_increase", loss_rise));
    outcome.check(
        "gd_equilibrium",
        s_eq >= threshold && s_eq <= 1.05 * threshold,
        format!("S_gd {s_eq:.6} (limits [{threshold}, {}])", 1.05 * threshold),
    );
    outcome.check(
        "reference_on_threshold",
        worst_sharp <= spec.tol_sharp,
        format!("max |S - 2/eta| after activation {worst_sharp:.3e} (limit {:.3e})", spec.tol_sharp),
    );
    outcome.check(
        "reference_loss_non_increasing",
        loss_rise <= 0.0,
        format!("largest one-step loss change {loss_rise:.3e}"),
    );
    Ok(outcome)
}
