use crate::error::{Error, Result};
use crate::landscape::{check_dim, Landscape};
use crate::scalar::Real;
use crate::vecmath::{RngStream, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sampling {
    /// Distinct indices. Carries the finite-population factor `(n−b)/(n−1)`.
    WithoutReplacement,
    WithReplacement,
    /// `ξ ~ N(0, Σ̂₁/b)` with `Σ̂₁` the empirical per-sample gradient covariance.
    GaussianSurrogate,
}

impl Sampling {
    pub fn name(self) -> &'static str {
        match self {
            Sampling::WithoutReplacement => "without_replacement",
            Sampling::WithReplacement => "with_replacement",
            Sampling::GaussianSurrogate => "gaussian_surrogate",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "without_replacement" => Some(Sampling::WithoutReplacement),
            "with_replacement" => Some(Sampling::WithReplacement),
            "gaussian_surrogate" => Some(Sampling::GaussianSurrogate),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseModel {
    pub batch_size: usize,
    pub sampling: Sampling,
}

impl NoiseModel {
    pub fn new(batch_size: usize, sampling: Sampling) -> Self {
        Self { batch_size, sampling }
    }

    /// Full-batch gradient descent: `ξ ≡ 0`.
    pub fn full_batch(n: usize) -> Self {
        Self::new(n, Sampling::WithoutReplacement)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.sampling == Sampling::WithoutReplacement && self.batch_size > n {
            return Err(Error::BatchTooLarge {
                batch: self.batch_size,
                n,
            });
        }
        Ok(())
    }

    pub fn is_full_batch(&self, n: usize) -> bool {
        self.sampling == Sampling::WithoutReplacement && self.batch_size == n
    }
}

/// Mini-batch gradient `g_B = ∇L + ξ`. `batch` is empty for the Gaussian
/// surrogate, and holds the full index range in full-batch mode.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchGradient<T> {
    pub g_b: Vector<T>,
    pub xi: Vector<T>,
    pub batch: Vec<usize>,
}

/// Draws one mini-batch gradient at `theta`.
///
/// `g_b` is assembled as `grad + xi` so the decomposition holds exactly in
/// floating point; in full-batch mode `xi` is exactly zero.
pub fn batch_grad<T: Real, L: Landscape<T> + ?Sized>(
    h: &L,
    theta: &Vector<T>,
    noise: &NoiseModel,
    rng: &mut RngStream,
) -> Result<BatchGradient<T>> {
    check_dim("batch_grad", h.dim(), theta)?;
    let n = h.n_samples();
    noise.validate(n)?;
    let grad = h.grad(theta)?;
    if noise.is_full_batch(n) {
        return Ok(BatchGradient {
            xi: Vector::zeros(h.dim()),
            g_b: grad,
            batch: (0..n).collect(),
        });
    }
    let (xi, batch) = match noise.sampling {
        Sampling::WithoutReplacement | Sampling::WithReplacement => {
            let batch = if noise.sampling == Sampling::WithoutReplacement {
                rng.sample_without_replacement(n, noise.batch_size)
            } else {
                rng.sample_with_replacement(n, noise.batch_size)
            };
            let raw = h.batch_grad_of(theta, &batch)?;
            (raw.sub(&grad)?, batch)
        }
        Sampling::GaussianSurrogate => {
            // Σ_i z_i (g_i − ḡ) / sqrt(b n) has covariance Σ̂₁ / b exactly.
            let mut acc = Vector::zeros(h.dim());
            for i in 0..n {
                let z: T = rng.normal();
                acc.add_scaled_in_place(z, &h.sample_deviation(theta, &grad, i)?);
            }
            let c = T::one() / (T::from_usize_lossy(noise.batch_size) * T::from_usize_lossy(n)).sqrt();
            (acc.scale(c)?, Vec::new())
        }
    };
    Ok(BatchGradient {
        g_b: grad.add(&xi)?,
        xi,
        batch,
    })
}
