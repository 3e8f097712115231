//! Presets on the scalar recursion for `(x̂, ŷ)`.

use eoslab_core::predicted::{
    simulate_ensemble, stationary_stats, stationary_stats_ensemble, ReducedCoeffs, ReducedRun, ReducedState,
};
use eoslab_core::probe::decorrelation_residual;
use eoslab_core::vecmath::RngStream;

use super::common::{key_num, mean_se};
use super::{Outputs, PresetOutcome};
use crate::config::ExperimentConfig;
use crate::csv::{EnsembleSummaryRow, SummaryRow, TrajectoryRow};
use crate::error::{Context, Result};

/// Runs stop once `|x̂|` exceeds this many `δ`.
const GUARD_DELTAS: f64 = 1e3;

struct Ensemble {
    sigma_u_sq: f64,
    coeffs: ReducedCoeffs<f64>,
    runs: Vec<ReducedRun<f64>>,
}

fn ensembles(cfg: &ExperimentConfig) -> Result<Vec<Ensemble>> {
    let base = RngStream::new(cfg.seed, 0);
    let init = ReducedState::new(cfg.x0, cfg.y0);
    cfg.sigma_list
        .iter()
        .enumerate()
        .map(|(k, &sigma_u_sq)| {
            let coeffs = ReducedCoeffs::new(cfg.eta, cfg.beta, cfg.delta_sq, cfg.kappa, sigma_u_sq)?;
            let guard = GUARD_DELTAS * coeffs.delta();
            let runs = simulate_ensemble(init, &coeffs, cfg.runs, cfg.steps, guard, &base.substream(k as u64))
                .at(|| format!("ensemble for sigma_u^2 = {sigma_u_sq}"))?;
            Ok(Ensemble {
                sigma_u_sq,
                coeffs,
                runs,
            })
        })
        .collect()
}

fn diverged(e: &Ensemble) -> usize {
    e.runs.iter().filter(|r| r.diverged_at.is_some()).count()
}

pub(crate) fn fig_sde(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<PresetOutcome> {
    let ens = ensembles(cfg)?;
    let mut outcome = PresetOutcome::default();
    let mut summary_rows = Vec::new();
    let mut means = Vec::new();
    for e in &ens {
        let stats = stationary_stats_ensemble(&e.runs, cfg.burn_in_fraction)?;
        // Per-run time averages give the across-run standard errors.
        let per_run: Vec<_> = e
            .runs
            .iter()
            .filter_map(|r| stationary_stats(&r.states, cfg.burn_in_fraction).ok())
            .collect();
        let (_, se_x) = mean_se(&per_run.iter().map(|s| s.mean_x_sq).collect::<Vec<_>>());
        let (_, se_y) = mean_se(&per_run.iter().map(|s| s.mean_y).collect::<Vec<_>>());
        let predicted = e.coeffs.predicted_mean_y();
        let key = key_num(e.sigma_u_sq);
        outcome.row(SummaryRow::new(format!("mean_x_sq.sigma_u_sq={key}"), stats.mean_x_sq, se_x));
        outcome.row(SummaryRow::new(format!("mean_y.sigma_u_sq={key}"), stats.mean_y, se_y));
        outcome.row(SummaryRow::exact(format!("predicted_mean_y.sigma_u_sq={key}"), predicted));
        outcome.row(SummaryRow::exact(format!("diverged_runs.sigma_u_sq={key}"), diverged(e) as f64));
        summary_rows.push(EnsembleSummaryRow {
            sigma_u_sq: e.sigma_u_sq,
            mean_x_sq: stats.mean_x_sq,
            mean_y: stats.mean_y,
            var_x_sq: stats.var_x_sq,
            var_y: stats.var_y,
            predicted_mean_y: predicted,
            diverged_runs: diverged(e) as u64,
            samples: stats.samples as u64,
        });
        means.push((e.sigma_u_sq, stats.mean_x_sq, stats.mean_y, predicted));

        let rows: Vec<TrajectoryRow> = e
            .runs
            .iter()
            .take(cfg.dump_runs)
            .enumerate()
            .flat_map(|(r, run)| {
                run.states.iter().map(move |s| TrajectoryRow {
                    run_id: r as u64,
                    t: s.t as u64,
                    x_hat: s.x_hat,
                    y_hat: s.y_hat,
                })
            })
            .collect();
        out.emit(&format!("reduced-trajectory-sigma_u_sq={key}.csv"), &rows, "reduced-trajectory")?;
    }
    out.emit("ensemble-summary.csv", &summary_rows, "ensemble-summary")?;

    let worst_x = means
        .iter()
        .map(|&(_, mx, _, _)| (mx - cfg.delta_sq).abs() / cfg.delta_sq)
        .fold(0.0, f64::max);
    outcome.check(
        "stationary_x_sq",
        worst_x <= 0.05,
        format!("max |E[x^2] - delta^2| / delta^2 = {worst_x:.4} (limit 0.05)"),
    );
    let gap_cases: Vec<_> = means.iter().filter(|m| m.0 >= 10.0).collect();
    let worst_y = gap_cases
        .iter()
        .map(|&&(_, _, my, p)| ((my - p) / p).abs())
        .fold(0.0, f64::max);
    outcome.check(
        "mean_y_matches_gap_formula",
        !gap_cases.is_empty() && worst_y <= 0.2,
        format!(
            "max relative error of E[y] for sigma_u^2 >= 10: {worst_y:.4} over {} levels (limit 0.2)",
            gap_cases.len()
        ),
    );
    let mut by_sigma = means.clone();
    by_sigma.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = by_sigma.windows(2).all(|w| w[1].2 <= w[0].2);
    outcome.check(
        "mean_y_non_increasing",
        monotone,
        format!(
            "E[y] by sigma_u^2: {}",
            by_sigma.iter().map(|m| format!("{:.4}", m.2)).collect::<Vec<_>>().join(", ")
        ),
    );
    Ok(outcome)
}

pub(crate) fn decorrelation(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<PresetOutcome> {
    let ens = ensembles(cfg)?;
    let mut outcome = PresetOutcome::default();
    let mut summary_rows = Vec::new();
    let mut worst = 0.0f64;
    // Equilibrium snapshots: ten evenly spaced steps after burn-in, ending at
    // the last step.
    let first = ((cfg.burn_in_fraction * cfg.steps as f64).ceil() as usize).max(1);
    let snaps: Vec<usize> = (1..=10).map(|k| first + (cfg.steps - first) * k / 10).collect();
    for e in &ens {
        let key = key_num(e.sigma_u_sq);
        let alive: Vec<&ReducedRun<f64>> = e.runs.iter().filter(|r| r.diverged_at.is_none()).collect();
        let mut rel = Vec::new();
        let mut last = None;
        for &t in &snaps {
            let states: Vec<ReducedState<f64>> = alive.iter().map(|r| r.states[t]).collect();
            let d = decorrelation_residual(&states, cfg.eta).at(|| format!("decorrelation at step {t}"))?;
            rel.push(d.abs_residual / d.lhs);
            last = Some(d);
        }
        let d = last.expect("at least one snapshot");
        let max_rel = rel.iter().copied().fold(0.0, f64::max);
        worst = worst.max(max_rel);
        let eps_delta_sq = e.coeffs.epsilon().powi(2) * e.coeffs.delta_sq;
        outcome.row(SummaryRow::exact(format!("lhs.sigma_u_sq={key}"), d.lhs));
        outcome.row(SummaryRow::exact(format!("rhs.sigma_u_sq={key}"), d.rhs));
        outcome.row(SummaryRow::exact(format!("abs_residual.sigma_u_sq={key}"), d.abs_residual));
        outcome.row(SummaryRow::exact(format!("max_rel_residual.sigma_u_sq={key}"), max_rel));
        outcome.row(SummaryRow::exact(
            format!("residual_over_eps2_delta2.sigma_u_sq={key}"),
            d.abs_residual / eps_delta_sq,
        ));

        let stats = stationary_stats_ensemble(&e.runs, cfg.burn_in_fraction)?;
        summary_rows.push(EnsembleSummaryRow {
            sigma_u_sq: e.sigma_u_sq,
            mean_x_sq: stats.mean_x_sq,
            mean_y: stats.mean_y,
            var_x_sq: stats.var_x_sq,
            var_y: stats.var_y,
            predicted_mean_y: e.coeffs.predicted_mean_y(),
            diverged_runs: diverged(e) as u64,
            samples: stats.samples as u64,
        });
    }
    out.emit("ensemble-summary.csv", &summary_rows, "ensemble-summary")?;
    outcome.check(
        "decorrelation_residual",
        !ens.is_empty() && worst <= 0.1,
        format!("max |lhs - rhs| / lhs over {} snapshots per level = {worst:.3e} (limit 0.1)", snaps.len()),
    );
    Ok(outcome)
}
