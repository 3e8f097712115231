use crate::error::{Error, Result};
use crate::landscape::{batch_grad, check_dim, Landscape, NoiseModel, Sampling};
use crate::predicted::{shifted_mean, ReducedState};
use crate::scalar::Real;
use crate::vecmath::{RngStream, Vector};

/// Default batch count for the projected noise variance.
pub const NOISE_VARIANCE_BATCHES: usize = 50;
/// Default batch count for batch sharpness.
pub const BATCH_SHARPNESS_BATCHES: usize = 30;
/// Number of trailing measurements averaged by [`equilibrium_sharpness`].
pub const EQUILIBRIUM_WINDOW: usize = 20;

fn sample_variance<T: Real>(values: &[T]) -> (T, T) {
    let mean = shifted_mean(values.iter().copied()).unwrap_or_else(T::zero);
    if values.len() < 2 {
        return (mean, T::zero());
    }
    let ss: T = values.iter().map(|&v| (v - mean) * (v - mean)).sum();
    (mean, ss / T::from_usize_lossy(values.len() - 1))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseVariance<T> {
    /// Unbiased sample variance of `⟨g_B, u⟩`.
    pub value: T,
    /// All projections were identical; `value` is 0.
    pub degenerate: bool,
    pub batches: usize,
}

/// `σ_u² = Var_B[⟨g_B, u⟩]` over `m_batches` fresh batches.
pub fn projected_noise_variance<T: Real, L: Landscape<T> + ?Sized>(
    h: &L,
    theta: &Vector<T>,
    u: &Vector<T>,
    noise: &NoiseModel,
    m_batches: usize,
    rng: &mut RngStream,
) -> Result<NoiseVariance<T>> {
    check_dim("projected_noise_variance direction", h.dim(), u)?;
    if m_batches < 2 {
        return Err(Error::InsufficientData {
            what: "mini-batches for a variance",
            needed: 2,
            got: m_batches,
        });
    }
    let mut proj = Vec::with_capacity(m_batches);
    for _ in 0..m_batches {
        let bg = batch_grad(h, theta, noise, rng)?;
        proj.push(bg.g_b.dot(u)?);
    }
    let first = proj[0];
    if proj.iter().all(|&p| p == first) {
        return Ok(NoiseVariance {
            value: T::zero(),
            degenerate: true,
            batches: m_batches,
        });
    }
    let (_, var) = sample_variance(&proj);
    Ok(NoiseVariance {
        value: var,
        degenerate: false,
        batches: m_batches,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchSharpness<T> {
    pub mean: T,
    /// Standard error of the mean over the used batches.
    pub stderr: T,
    pub used: usize,
    /// Batches skipped because their gradient was exactly zero.
    pub skipped: usize,
}

/// `E_B[g_Bᵀ H_B g_B / ‖g_B‖²]` over `m_batches` batches. In full-batch mode and
/// for the Gaussian surrogate the full Hessian stands in for `H_B`.
pub fn batch_sharpness<T: Real, L: Landscape<T> + ?Sized>(
    h: &L,
    theta: &Vector<T>,
    noise: &NoiseModel,
    m_batches: usize,
    rng: &mut RngStream,
) -> Result<BatchSharpness<T>> {
    if m_batches == 0 {
        return Err(Error::InsufficientData {
            what: "mini-batches for batch sharpness",
            needed: 1,
            got: 0,
        });
    }
    let full = noise.is_full_batch(h.n_samples()) || noise.sampling == Sampling::GaussianSurrogate;
    let mut values = Vec::with_capacity(m_batches);
    let mut skipped = 0;
    for _ in 0..m_batches {
        let bg = batch_grad(h, theta, noise, rng)?;
        let nsq = bg.g_b.norm_sq();
        if nsq == T::zero() {
            skipped += 1;
            continue;
        }
        let hg = if full {
            h.hvp(theta, &bg.g_b)?
        } else {
            h.batch_hvp(theta, &bg.batch, &bg.g_b)?
        };
        values.push(bg.g_b.dot(&hg)? / nsq);
    }
    if values.is_empty() {
        return Err(Error::InsufficientData {
            what: "batches with non-zero gradient",
            needed: 1,
            got: 0,
        });
    }
    let (mean, var) = sample_variance(&values);
    Ok(BatchSharpness {
        mean,
        stderr: (var / T::from_usize_lossy(values.len())).sqrt(),
        used: values.len(),
        skipped,
    })
}

/// Mean of the last [`EQUILIBRIUM_WINDOW`] sharpness measurements.
pub fn equilibrium_sharpness<T: Real>(series: &[(usize, T)]) -> Result<T> {
    if series.len() < EQUILIBRIUM_WINDOW {
        return Err(Error::InsufficientData {
            what: "sharpness measurements for the equilibrium average",
            needed: EQUILIBRIUM_WINDOW,
            got: series.len(),
        });
    }
    let tail = &series[series.len() - EQUILIBRIUM_WINDOW..];
    Ok(shifted_mean(tail.iter().map(|&(_, s)| s)).unwrap_or_else(T::zero))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r2: T,
    pub n_points: usize,
}

impl<T: Real> PowerLawFit<T> {
    pub fn predict(&self, x: T) -> T {
        T::lit(10.0).powf(self.intercept + self.slope * x.log10())
    }
}

/// Ordinary least squares of `log10 y` on `log10 x`.
pub fn power_law_fit<T: Real>(points: &[(T, T)]) -> Result<PowerLawFit<T>> {
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            what: "points for a power-law fit",
            needed: 3,
            got: points.len(),
        });
    }
    let offenders: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, &(x, y))| !(x > T::zero() && y > T::zero() && x.is_finite() && y.is_finite()))
        .map(|(i, _)| i)
        .collect();
    if !offenders.is_empty() {
        return Err(Error::NonPositive { offenders });
    }
    let lx: Vec<T> = points.iter().map(|p| p.0.log10()).collect();
    let ly: Vec<T> = points.iter().map(|p| p.1.log10()).collect();
    let n = T::from_usize_lossy(points.len());
    let mx = lx.iter().copied().sum::<T>() / n;
    let my = ly.iter().copied().sum::<T>() / n;
    let sxx: T = lx.iter().map(|&x| (x - mx) * (x - mx)).sum();
    if sxx == T::zero() {
        return Err(Error::invalid("power-law fit needs at least two distinct x values"));
    }
    let sxy: T = lx.iter().zip(&ly).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: T = ly.iter().map(|&y| (y - my) * (y - my)).sum();
    let ss_res: T = lx
        .iter()
        .zip(&ly)
        .map(|(&x, &y)| {
            let r = y - (my + slope * (x - mx));
            r * r
        })
        .sum();
    let r2 = if ss_tot == T::zero() {
        T::one()
    } else {
        (T::one() - ss_res / ss_tot).max(T::zero()).min(T::one())
    };
    Ok(PowerLawFit {
        slope,
        intercept,
        r2,
        n_points: points.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decorrelation<T> {
    /// `E[(1 + ηŷ)² x̂²]`.
    pub lhs: T,
    /// `(1 + ηȳ)² E[x̂²]`.
    pub rhs: T,
    pub abs_residual: T,
}

/// Minimum ensemble size for [`decorrelation_residual`].
pub const DECORRELATION_MIN_ENSEMBLE: usize = 100;

/// Compares `E[(1+ηŷ)²x̂²]` with `(1+ηȳ)²E[x̂²]` over an ensemble of states
/// taken at the same step.
pub fn decorrelation_residual<T: Real>(ensemble: &[ReducedState<T>], eta: T) -> Result<Decorrelation<T>> {
    if ensemble.len() < DECORRELATION_MIN_ENSEMBLE {
        return Err(Error::InsufficientData {
            what: "ensemble members for the decorrelation residual",
            needed: DECORRELATION_MIN_ENSEMBLE,
            got: ensemble.len(),
        });
    }
    let factor = |y: T| {
        let f = T::one() + eta * y;
        f * f
    };
    let lhs = shifted_mean(ensemble.iter().map(|s| factor(s.y_hat) * (s.x_hat * s.x_hat))).unwrap_or_else(T::zero);
    let y_bar = shifted_mean(ensemble.iter().map(|s| s.y_hat)).unwrap_or_else(T::zero);
    let x_sq = shifted_mean(ensemble.iter().map(|s| s.x_hat * s.x_hat)).unwrap_or_else(T::zero);
    let rhs = factor(y_bar) * x_sq;
    Ok(Decorrelation {
        lhs,
        rhs,
        abs_residual: (lhs - rhs).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_inverse_law() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x| (x, 1.0 / x)).collect();
        let fit = power_law_fit(&pts).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-14);
        assert_eq!(fit.r2, 1.0);
    }

    #[test]
    fn single_point_rejected() {
        assert!(power_law_fit(&[(1.0_f64, 1.0)]).is_err());
    }

    #[test]
    fn non_positive_points_listed() {
        let err = power_law_fit(&[(1.0_f64, 1.0), (0.0, 2.0), (3.0, -1.0), (4.0, 1.0)]).unwrap_err();
        assert_eq!(err, Error::NonPositive { offenders: vec![1, 2] });
    }

    #[test]
    fn equilibrium_needs_twenty() {
        let s: Vec<(usize, f64)> = (0..19).map(|t| (t, 200.0)).collect();
        assert!(equilibrium_sharpness(&s).is_err());
        let s: Vec<(usize, f64)> = (0..40).map(|t| (t, 200.0)).collect();
        assert_eq!(equilibrium_sharpness(&s).unwrap(), 200.0);
    }

    #[test]
    fn sawtooth_mean() {
        let s: Vec<(usize, f64)> = (0..100)
            .map(|t| (t, if t % 2 == 0 { 196.0 } else { 194.0 }))
            .collect();
        assert!((equilibrium_sharpness(&s).unwrap() - 195.0).abs() < 0.5);
    }

    #[test]
    fn identical_ensemble_has_zero_residual() {
        let e = vec![ReducedState { x_hat: 0.7, y_hat: -0.3, t: 5 }; 100];
        let d = decorrelation_residual(&e, 0.01).unwrap();
        assert_eq!(d.abs_residual, 0.0);
    }
}
