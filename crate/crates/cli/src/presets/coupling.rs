//! Scaling study of the gap between SGD and the predicted displacement.

use rayon::prelude::*;

use eoslab_core::landscape::{LandscapeSpec, NoiseModel};
use eoslab_core::probe::{coupling_run, probe_point, CouplingOptions, CouplingRun, ProbeOptions};
use eoslab_core::vecmath::RngStream;

use super::{Outputs, PresetOutcome};
use crate::config::ExperimentConfig;
use crate::csv::SummaryRow;
use crate::error::{CliError, Context, Result};

/// Accepted range of `max_deviation(ε) / max_deviation(ε/2)`.
const RATIO_RANGE: (f64, f64) = (2.0 / 1.5, 2.0 * 1.5);

struct Leg {
    alpha0: f64,
    epsilon: f64,
    delta: f64,
    run: CouplingRun<f64>,
}

/// One coupling run per `alpha0` in `alpha0_list`, each over
/// `round(horizon_factor / ε)` steps.
pub(crate) fn coupling_study(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<PresetOutcome> {
    let LandscapeSpec::Canonical(base_spec) = &cfg.landscape else {
        return Err(CliError::Invalid(
            "the coupling study varies alpha0 and needs the canonical landscape".into(),
        ));
    };
    let base_rng = RngStream::new(cfg.seed, 6);
    let legs: Vec<Leg> = cfg
        .alpha0_list
        .par_iter()
        .enumerate()
        .map(|(k, &alpha0)| -> Result<Leg> {
            let spec = eoslab_core::landscape::CanonicalCubicSpec {
                alpha0,
                ..base_spec.clone()
            };
            let h = spec.build::<f64>()?;
            let theta0 = spec.threshold_point::<f64>(cfg.eta, 0.0)?;
            let rng = base_rng.substream(k as u64);
            let r0 = probe_point(&h, &theta0, &ProbeOptions::new(cfg.eta), &mut rng.substream(2), None)?;
            if !(r0.epsilon > 0.0) {
                return Err(CliError::Invalid(format!("alpha0 = {alpha0}: epsilon is not positive")));
            }
            let steps = (cfg.horizon_factor / r0.epsilon).round() as usize;
            let noise = match cfg.batch_sizes.first() {
                Some(&b) => {
                    let n = NoiseModel::new(b, cfg.sampling);
                    n.validate(spec.n_samples)?;
                    n
                }
                None => NoiseModel::full_batch(spec.n_samples),
            };
            let mut opts = CouplingOptions::new(cfg.eta, noise, steps);
            opts.perturb = cfg.perturb;
            let run = coupling_run(&h, &theta0, &opts, &rng).at(|| format!("coupling run for alpha0 = {alpha0}"))?;
            Ok(Leg {
                alpha0,
                epsilon: r0.epsilon,
                delta: r0.delta,
                run,
            })
        })
        .collect::<Result<_>>()?;

    let mut outcome = PresetOutcome::default();
    for (k, leg) in legs.iter().enumerate() {
        out.emit(&format!("coupling-alpha0={}.csv", leg.alpha0), &leg.run.records, "coupling")?;
        outcome.row(SummaryRow::exact(format!("epsilon.{k}"), leg.epsilon));
        outcome.row(SummaryRow::exact(format!("delta.{k}"), leg.delta));
        outcome.row(SummaryRow::exact(format!("steps.{k}"), leg.run.records.len().saturating_sub(1) as f64));
        outcome.row(SummaryRow::exact(format!("max_deviation.{k}"), leg.run.max_deviation()));
        outcome.row(SummaryRow::exact(
            format!("max_deviation_over_eps_delta.{k}"),
            leg.run.max_deviation() / (leg.epsilon * leg.delta),
        ));
    }
    let diverged: Vec<f64> = legs.iter().filter(|l| l.run.diverged_at.is_some()).map(|l| l.alpha0).collect();
    outcome.check(
        "no_divergence",
        diverged.is_empty(),
        format!("diverged alpha0 values: {diverged:?}"),
    );

    let t0 = legs
        .iter()
        .map(|l| l.run.records.first().map_or(f64::NAN, |r| r.deviation))
        .fold(0.0, f64::max);
    outcome.row(SummaryRow::exact("t0_deviation", t0));
    outcome.check("zero_initial_deviation", t0 == 0.0, format!("largest deviation at t = 0: {t0:e}"));

    let mut ratios = Vec::new();
    for (k, w) in legs.windows(2).enumerate() {
        let eps_ratio = w[0].epsilon / w[1].epsilon;
        let ratio = w[0].run.max_deviation() / w[1].run.max_deviation();
        outcome.row(SummaryRow::exact(format!("epsilon_ratio.{k}"), eps_ratio));
        outcome.row(SummaryRow::exact(format!("deviation_ratio.{k}"), ratio));
        ratios.push(ratio);
    }
    let in_range = !ratios.is_empty() && ratios.iter().all(|r| (RATIO_RANGE.0..=RATIO_RANGE.1).contains(r));
    outcome.check(
        "deviation_halves_with_epsilon",
        in_range,
        format!(
            "deviation ratios {} (limits [{:.3}, {:.3}])",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", "),
            RATIO_RANGE.0,
            RATIO_RANGE.1
        ),
    );
    Ok(outcome)
}
