//! Loss landscapes: loss, gradients, Hessian-vector products and the
//! third-derivative form `∇³L(θ)(u, u)`.

mod canonical;
mod mlp;
mod noise;
mod spec;

pub use canonical::{CanonicalCubic, CanonicalCubicSpec, NoiseSubspace};
pub use mlp::{MlpSpec, TeacherStudentMlp, ThirdFormScheme};
pub use noise::{batch_grad, BatchGradient, NoiseModel, Sampling};
pub use spec::LandscapeSpec;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vecmath::Vector;

/// How a derivative is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Derivative {
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exactness {
    pub grad: Derivative,
    pub hvp: Derivative,
    pub third_form: Derivative,
}

/// Empirical-risk landscape `L(θ) = (1/n) Σ ℓ_i(θ)`.
///
/// Implementations are read-only after construction.
pub trait Landscape<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    fn n_samples(&self) -> usize;

    fn exactness(&self) -> Exactness;

    fn loss(&self, theta: &Vector<T>) -> Result<T>;

    fn grad(&self, theta: &Vector<T>) -> Result<Vector<T>>;

    /// Gradient of the single-sample loss `ℓ_i`.
    fn sample_grad(&self, theta: &Vector<T>, i: usize) -> Result<Vector<T>>;

    /// Average of per-sample gradients over `batch` (indices may repeat).
    fn batch_grad_of(&self, theta: &Vector<T>, batch: &[usize]) -> Result<Vector<T>> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let mut acc = Vector::zeros(self.dim());
        for &i in batch {
            acc.add_scaled_in_place(T::one(), &self.sample_grad(theta, i)?);
        }
        acc.scale(T::one() / T::from_usize_lossy(batch.len()))
    }

    /// `g_i(θ) − ∇L(θ)`; the Gaussian surrogate is built from these.
    fn sample_deviation(&self, theta: &Vector<T>, full_grad: &Vector<T>, i: usize) -> Result<Vector<T>> {
        self.sample_grad(theta, i)?.sub(full_grad)
    }

    fn hvp(&self, theta: &Vector<T>, v: &Vector<T>) -> Result<Vector<T>>;

    /// Product with the Hessian of the batch loss `(1/b) Σ_{i∈B} ℓ_i`.
    fn batch_hvp(&self, theta: &Vector<T>, batch: &[usize], v: &Vector<T>) -> Result<Vector<T>>;

    /// `∇³L(θ)(u, u)`, the gradient of `θ ↦ uᵀ∇²L(θ)u` with `u` held fixed.
    fn third_form(&self, theta: &Vector<T>, u: &Vector<T>) -> Result<Vector<T>>;
}

pub(crate) fn check_dim<T: Real>(context: &'static str, expected: usize, v: &Vector<T>) -> Result<()> {
    if v.dim() != expected {
        return Err(Error::DimensionMismatch {
            context,
            left: expected,
            right: v.dim(),
        });
    }
    Ok(())
}

pub(crate) fn check_index(context: &'static str, index: usize, len: usize) -> Result<()> {
    if index >= len {
        return Err(Error::IndexOutOfRange { context, index, len });
    }
    Ok(())
}

pub(crate) fn finite_or<T: Real>(value: T, theta: &Vector<T>, what: &str) -> Result<T> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            context: format!("{what} at |theta| = {:e}", theta.norm().as_f64()),
        })
    }
}
