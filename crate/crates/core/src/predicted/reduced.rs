use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::predicted::shifted_mean;
use crate::scalar::Real;
use crate::vecmath::RngStream;

/// Frozen coefficients of the scalar recursion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedCoeffs<T> {
    pub eta: T,
    pub beta: T,
    pub delta_sq: T,
    pub kappa: T,
    pub sigma_u_sq: T,
}

impl<T: Real> ReducedCoeffs<T> {
    pub fn new(eta: T, beta: T, delta_sq: T, kappa: T, sigma_u_sq: T) -> Result<Self> {
        let c = Self {
            eta,
            beta,
            delta_sq,
            kappa,
            sigma_u_sq,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.eta, self.beta, self.delta_sq, self.kappa, self.sigma_u_sq];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "reduced coefficients".into(),
            });
        }
        if !(self.eta > T::zero() && self.beta > T::zero() && self.delta_sq > T::zero()) {
            return Err(Error::invalid("reduced dynamics needs eta, beta, delta_sq > 0"));
        }
        if self.sigma_u_sq < T::zero() {
            return Err(Error::invalid("sigma_u_sq must be non-negative"));
        }
        Ok(())
    }

    /// `α = β·δ²/2`.
    pub fn alpha(&self) -> T {
        self.beta * self.delta_sq / T::lit(2.0)
    }

    pub fn delta(&self) -> T {
        self.delta_sq.sqrt()
    }

    /// `ε = η·√α`.
    pub fn epsilon(&self) -> T {
        self.eta * self.alpha().sqrt()
    }

    /// Predicted stationary mean of `ŷ`, i.e. minus the sharpness gap.
    pub fn predicted_mean_y(&self) -> T {
        -self.eta * self.sigma_u_sq / (T::lit(2.0) * self.delta_sq)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedState<T> {
    pub x_hat: T,
    pub y_hat: T,
    pub t: usize,
}

impl<T: Real> ReducedState<T> {
    pub fn new(x_hat: T, y_hat: T) -> Self {
        Self { x_hat, y_hat, t: 0 }
    }
}

/// One step of the scalar recursion with noise draw `zeta = ⟨u, ξ⟩`:
///
/// `x̂' = −(1 + ηŷ)x̂ − (η/2)κx̂² − ηζ`, `ŷ' = ŷ + (ηβ/2)(δ² − x̂²)`.
pub fn reduced_step<T: Real>(state: ReducedState<T>, c: &ReducedCoeffs<T>, zeta: T) -> ReducedState<T> {
    let half = T::lit(0.5);
    let x = state.x_hat;
    let x_next = -(T::one() + c.eta * state.y_hat) * x - half * c.eta * c.kappa * x * x - c.eta * zeta;
    let y_next = state.y_hat + half * c.eta * c.beta * (c.delta_sq - x * x);
    ReducedState {
        x_hat: x_next,
        y_hat: y_next,
        t: state.t + 1,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedRun<T> {
    /// States `t = 0 ..= steps`, truncated after a divergence.
    pub states: Vec<ReducedState<T>>,
    /// Step at which `|x̂|` exceeded the guard.
    pub diverged_at: Option<usize>,
}

/// Simulates one run with Gaussian `ζ_t ~ N(0, σ_u²)`. The run stops when
/// `|x̂|` exceeds `guard` or a state becomes non-finite.
pub fn simulate_reduced<T: Real>(
    init: ReducedState<T>,
    c: &ReducedCoeffs<T>,
    steps: usize,
    guard: T,
    rng: &mut RngStream,
) -> Result<ReducedRun<T>> {
    c.validate()?;
    let sigma = c.sigma_u_sq.sqrt();
    let mut states = Vec::with_capacity(steps + 1);
    let mut s = init;
    states.push(s);
    for _ in 0..steps {
        let zeta = if sigma > T::zero() {
            sigma * rng.normal::<T>()
        } else {
            T::zero()
        };
        s = reduced_step(s, c, zeta);
        if !(s.x_hat.is_finite() && s.y_hat.is_finite()) || s.x_hat.abs() > guard {
            return Ok(ReducedRun {
                states,
                diverged_at: Some(s.t),
            });
        }
        states.push(s);
    }
    Ok(ReducedRun {
        states,
        diverged_at: None,
    })
}

/// Independent runs in parallel; run `r` draws from `rng.substream(r)`.
pub fn simulate_ensemble<T: Real>(
    init: ReducedState<T>,
    c: &ReducedCoeffs<T>,
    runs: usize,
    steps: usize,
    guard: T,
    rng: &RngStream,
) -> Result<Vec<ReducedRun<T>>> {
    (0..runs)
        .into_par_iter()
        .map(|r| simulate_reduced(init, c, steps, guard, &mut rng.substream(r as u64)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationaryStats<T> {
    pub mean_x_sq: T,
    pub mean_y: T,
    pub var_x_sq: T,
    pub var_y: T,
    pub samples: usize,
}

fn window<T>(traj: &[ReducedState<T>], burn_in_fraction: f64) -> &[ReducedState<T>] {
    let skip = (burn_in_fraction * traj.len() as f64).floor() as usize;
    &traj[skip.min(traj.len())..]
}

fn stats_of<'a, T: Real>(
    windows: impl Iterator<Item = &'a [ReducedState<T>]> + Clone,
) -> Result<StationaryStats<T>> {
    let flat = windows.flat_map(|w| w.iter());
    let samples = flat.clone().count();
    if samples == 0 {
        return Err(Error::InsufficientData {
            what: "post-burn-in window",
            needed: 1,
            got: 0,
        });
    }
    let xs = flat.clone().map(|s| s.x_hat * s.x_hat);
    let ys = flat.clone().map(|s| s.y_hat);
    let mean_x_sq = shifted_mean(xs.clone()).unwrap_or_else(T::zero);
    let mean_y = shifted_mean(ys.clone()).unwrap_or_else(T::zero);
    let var = |vals: &mut dyn Iterator<Item = T>, m: T| -> T {
        if samples < 2 {
            return T::zero();
        }
        let ss: T = vals.map(|v| (v - m) * (v - m)).sum();
        ss / T::from_usize_lossy(samples - 1)
    };
    Ok(StationaryStats {
        mean_x_sq,
        mean_y,
        var_x_sq: var(&mut xs.clone(), mean_x_sq),
        var_y: var(&mut ys.clone(), mean_y),
        samples,
    })
}

/// Time averages over the part of `traj` after the first `burn_in_fraction`.
pub fn stationary_stats<T: Real>(traj: &[ReducedState<T>], burn_in_fraction: f64) -> Result<StationaryStats<T>> {
    check_burn_in(burn_in_fraction)?;
    stats_of(std::iter::once(window(traj, burn_in_fraction)))
}

/// Time-and-ensemble averages; the burn-in is applied to each run separately.
pub fn stationary_stats_ensemble<T: Real>(runs: &[ReducedRun<T>], burn_in_fraction: f64) -> Result<StationaryStats<T>> {
    check_burn_in(burn_in_fraction)?;
    stats_of(runs.iter().map(|r| window(&r.states, burn_in_fraction)))
}

fn check_burn_in(f: f64) -> Result<()> {
    if !(0.0..1.0).contains(&f) {
        return Err(Error::invalid(format!("burn-in fraction {f} outside [0, 1)")));
    }
    Ok(())
}

/// Sharpness gap `ΔS = η·β·σ_u² / (4α)` below `2/η`.
pub fn equilibrium_gap<T: Real>(eta: T, beta: T, alpha: T, sigma_u_sq: T) -> Result<T> {
    if !(alpha > T::zero()) {
        return Err(Error::invalid(format!(
            "equilibrium gap needs alpha > 0 (got {alpha}); no progressive sharpening"
        )));
    }
    if !(beta > T::zero()) {
        return Err(Error::invalid(format!("equilibrium gap needs beta > 0 (got {beta})")));
    }
    Ok(eta * beta * sigma_u_sq / (T::lit(4.0) * alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_arithmetic() {
        assert_eq!(equilibrium_gap(0.01, 1.0, 0.25, 0.0).unwrap(), 0.0);
        assert!((equilibrium_gap(0.01f64, 1.0, 0.25, 40.0).unwrap() - 0.4).abs() < 1e-15);
        assert!(equilibrium_gap(0.01, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn constant_series_stats() {
        let traj = vec![ReducedState { x_hat: 0.3, y_hat: -0.1, t: 0 }; 50];
        let s = stationary_stats(&traj, 0.3).unwrap();
        assert_eq!(s.mean_x_sq, 0.3 * 0.3);
        assert_eq!(s.mean_y, -0.1);
        assert_eq!(s.var_x_sq, 0.0);
        assert_eq!(s.var_y, 0.0);
    }

    #[test]
    fn empty_window_is_error() {
        let traj: Vec<ReducedState<f64>> = Vec::new();
        assert!(stationary_stats(&traj, 0.3).is_err());
    }

    #[test]
    fn guard_truncates_run() {
        let c = ReducedCoeffs::new(0.01, 1.0, 0.5, 0.0, 0.0).unwrap();
        let run = simulate_reduced(ReducedState::new(5.0, 0.0), &c, 10, 1.0, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(run.diverged_at, Some(1));
        assert_eq!(run.states.len(), 1);
    }
}
