use crate::error::{Error, Result};
use crate::landscape::{batch_grad, Landscape, NoiseModel};
use crate::predicted::{full_predicted_step, PredictedVectorState};
use crate::probe::{lanczos_options_for, ProbeOptions, ProbedFrame};
use crate::refpath::{RefTrajectory, StableSetSpec};
use crate::scalar::Real;
use crate::vecmath::{lanczos_top, RngStream, Vector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingOptions<T> {
    pub eta: T,
    pub noise: NoiseModel,
    pub steps: usize,
    /// Initial displacement `v₀ = perturb · δ₀ · u₀` from the projected start.
    pub perturb: T,
    pub stable: StableSetSpec<T>,
    pub probe: ProbeOptions<T>,
    /// The run stops once `‖v_t‖ > guard · δ₀`.
    pub guard: T,
}

impl<T: Real> CouplingOptions<T> {
    pub fn new(eta: T, noise: NoiseModel, steps: usize) -> Self {
        Self {
            eta,
            noise,
            steps,
            perturb: T::lit(0.5),
            stable: StableSetSpec::new(eta),
            probe: ProbeOptions::new(eta),
            guard: T::lit(1e3),
        }
    }
}

/// Residuals of one step of the three coupled evolutions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingRecord<T> {
    pub t: usize,
    /// `‖θ_t − θ†_t‖`.
    pub norm_v: T,
    pub norm_vhat: T,
    /// `‖v_t − v̂_t‖`.
    pub deviation: T,
    /// `L(θ_t) − L(θ†_t) − x̂_t²/η`.
    pub loss_residual: T,
    /// `S(θ_t) − 2/η − ŷ_t − κ_t x̂_t`, with `κ_t` taken at `θ†_t`.
    pub sharp_residual: T,
    pub x_hat: T,
    pub y_hat: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingRun<T> {
    pub records: Vec<CouplingRecord<T>>,
    /// Step at which the SGD iterate left the guard radius or became non-finite.
    pub diverged_at: Option<usize>,
    pub delta0: T,
    pub epsilon0: T,
}

impl<T: Real> CouplingRun<T> {
    pub fn max_deviation(&self) -> T {
        self.records.iter().fold(T::zero(), |m, r| m.max(r.deviation))
    }
}

/// Advances SGD `θ_{t+1} = θ_t − η g_B(θ_t)`, the reference trajectory `θ†_t`
/// and the predicted displacement `v̂_t` side by side. The SGD step and the
/// predicted step consume the same noise vector `ξ_t`.
///
/// `rng.substream(0)` drives Lanczos start vectors and `rng.substream(1)` the
/// mini-batches.
pub fn coupling_run<T: Real, L: Landscape<T> + ?Sized>(
    h: &L,
    theta0: &Vector<T>,
    opts: &CouplingOptions<T>,
    rng: &RngStream,
) -> Result<CouplingRun<T>> {
    let mut probe_rng = rng.substream(0);
    let mut noise_rng = rng.substream(1);
    let mut reference = RefTrajectory::start(h, theta0, opts.stable, opts.probe, &mut probe_rng)?;
    let r0 = reference.last_report().clone();
    if !(r0.delta > T::zero()) {
        return Err(Error::invalid(
            "coupling run needs alpha > 0 and beta > 0 at the projected start",
        ));
    }
    let delta0 = r0.delta;
    let mut theta = r0.at.axpy(opts.perturb * delta0, &r0.u)?;
    let v0 = theta.sub(&r0.at)?;
    let mut state = PredictedVectorState::new(v0, &ProbedFrame::new(&r0, h))?;

    let threshold = T::lit(2.0) / opts.eta;
    let lanczos = lanczos_options_for(h, &opts.probe.lanczos);
    let mut records = Vec::with_capacity(opts.steps + 1);
    let mut diverged_at = None;
    for t in 0..=opts.steps {
        let rt = reference.last_report().clone();
        let v = theta.sub(&rt.at)?;
        let norm_v = v.norm();
        if !(norm_v <= opts.guard * delta0) {
            diverged_at = Some(t);
            break;
        }
        let s_theta = lanczos_top(
            |w| h.hvp(&theta, w),
            h.dim(),
            &mut probe_rng,
            &lanczos,
            Some(&rt.u),
        )?
        .value;
        let x = state.x_hat;
        records.push(CouplingRecord {
            t,
            norm_v,
            norm_vhat: state.v_hat.norm(),
            deviation: v.sub(&state.v_hat)?.norm(),
            loss_residual: h.loss(&theta)? - rt.loss - x * x / opts.eta,
            sharp_residual: s_theta - threshold - state.y_hat - rt.kappa * x,
            x_hat: x,
            y_hat: state.y_hat,
        });
        if t == opts.steps {
            break;
        }

        let bg = batch_grad(h, &theta, &opts.noise, &mut noise_rng)?;
        theta = match theta.axpy(-opts.eta, &bg.g_b) {
            Ok(next) => next,
            Err(Error::NonFinite { .. }) => {
                diverged_at = Some(t + 1);
                break;
            }
            Err(e) => return Err(e),
        };
        reference.advance(h, &mut probe_rng)?;
        let n = reference.reports.len();
        let (prev, next) = (&reference.reports[n - 2], &reference.reports[n - 1]);
        state = full_predicted_step(
            &state,
            &ProbedFrame::new(prev, h),
            &ProbedFrame::new(next, h),
            &bg.xi,
            opts.eta,
        )?;
    }
    Ok(CouplingRun {
        records,
        diverged_at,
        delta0,
        epsilon0: r0.epsilon,
    })
}
