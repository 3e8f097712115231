use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vecmath::Vector;

/// Local quantities at one reference point that the vector recursion needs.
pub trait CurvatureFrame<T: Real> {
    /// Top Hessian eigenvector (unit norm).
    fn u(&self) -> &Vector<T>;
    /// Sharpness gradient with its `u` component removed.
    fn grad_s_perp(&self) -> &Vector<T>;
    fn delta_sq(&self) -> T;
    fn kappa(&self) -> T;
    fn apply_hessian(&self, v: &Vector<T>) -> Result<Vector<T>>;

    /// `A v = (I − ηH) P⊥_u v`.
    fn apply_a(&self, v: &Vector<T>, eta: T) -> Result<Vector<T>> {
        let p = v.project_out(self.u())?;
        p.axpy(-eta, &self.apply_hessian(&p)?)
    }

    /// `Aᵀ v = P⊥_u (I − ηH) v`.
    fn apply_a_transpose(&self, v: &Vector<T>, eta: T) -> Result<Vector<T>> {
        v.axpy(-eta, &self.apply_hessian(v)?)?.project_out(self.u())
    }
}

/// Frame with an explicit dense symmetric Hessian (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseFrame<T> {
    pub u: Vector<T>,
    pub grad_s_perp: Vector<T>,
    pub delta_sq: T,
    pub kappa: T,
    pub hessian: Vec<T>,
}

impl<T: Real> DenseFrame<T> {
    pub fn new(u: Vector<T>, grad_s_perp: Vector<T>, delta_sq: T, kappa: T, hessian: Vec<T>) -> Result<Self> {
        let d = u.dim();
        if grad_s_perp.dim() != d {
            return Err(Error::DimensionMismatch {
                context: "dense frame grad_s_perp",
                left: d,
                right: grad_s_perp.dim(),
            });
        }
        if hessian.len() != d * d {
            return Err(Error::DimensionMismatch {
                context: "dense frame hessian",
                left: d * d,
                right: hessian.len(),
            });
        }
        Ok(Self {
            u,
            grad_s_perp,
            delta_sq,
            kappa,
            hessian,
        })
    }
}

impl<T: Real> CurvatureFrame<T> for DenseFrame<T> {
    fn u(&self) -> &Vector<T> {
        &self.u
    }

    fn grad_s_perp(&self) -> &Vector<T> {
        &self.grad_s_perp
    }

    fn delta_sq(&self) -> T {
        self.delta_sq
    }

    fn kappa(&self) -> T {
        self.kappa
    }

    fn apply_hessian(&self, v: &Vector<T>) -> Result<Vector<T>> {
        let d = self.u.dim();
        if v.dim() != d {
            return Err(Error::DimensionMismatch {
                context: "dense frame hvp",
                left: d,
                right: v.dim(),
            });
        }
        let out = (0..d)
            .map(|i| crate::vecmath::dot_slices(&self.hessian[i * d..(i + 1) * d], v.as_slice()))
            .collect();
        Vector::from_vec(out)
    }
}

/// `v̂` together with its coordinates `x̂ = ⟨u, v̂⟩`, `ŷ = ⟨∇S⊥, v̂⟩` in the
/// frame it was last advanced into.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictedVectorState<T> {
    pub v_hat: Vector<T>,
    pub x_hat: T,
    pub y_hat: T,
}

impl<T: Real> PredictedVectorState<T> {
    pub fn new<F: CurvatureFrame<T> + ?Sized>(v_hat: Vector<T>, frame: &F) -> Result<Self> {
        let x_hat = frame.u().dot(&v_hat)?;
        let y_hat = frame.grad_s_perp().dot(&v_hat)?;
        Ok(Self { v_hat, x_hat, y_hat })
    }
}

/// One step of the vector recursion from frame `t` to frame `t + 1`:
///
/// `v̂' = P⊥_{u'}[(I − ηH)P⊥_u v̂ + η∇S⊥(δ² − x̂²)/2] − ((1 + ηŷ)x̂ + (η/2)κx̂²)u' − ηξ`.
pub fn full_predicted_step<T, F0, F1>(
    state: &PredictedVectorState<T>,
    frame_t: &F0,
    frame_t1: &F1,
    xi: &Vector<T>,
    eta: T,
) -> Result<PredictedVectorState<T>>
where
    T: Real,
    F0: CurvatureFrame<T> + ?Sized,
    F1: CurvatureFrame<T> + ?Sized,
{
    let half = T::lit(0.5);
    let (x, y) = (state.x_hat, state.y_hat);
    let source = half * eta * (frame_t.delta_sq() - x * x);
    let inner = frame_t
        .apply_a(&state.v_hat, eta)?
        .axpy(source, frame_t.grad_s_perp())?
        .project_out(frame_t1.u())?;
    let along_u = (T::one() + eta * y) * x + half * eta * frame_t.kappa() * x * x;
    let v_next = inner.axpy(-along_u, frame_t1.u())?.axpy(-eta, xi)?;
    PredictedVectorState::new(v_next, frame_t1)
}

fn frame_at<'a, T: Real, F: CurvatureFrame<T>>(frames: &'a [F], k: usize, context: &'static str) -> Result<&'a F> {
    frames.get(k).ok_or(Error::IndexOutOfRange {
        context,
        index: k,
        len: frames.len(),
    })
}

/// `β_{s→t} = (∇S⊥_{t+1})ᵀ A_t ⋯ A_{s+1} ∇S⊥_s`, the product being empty when
/// `s = t`. Needs `frames[s ..= t + 1]`.
pub fn propagation_factor<T: Real, F: CurvatureFrame<T>>(s: usize, t: usize, frames: &[F], eta: T) -> Result<T> {
    if s > t {
        return Err(Error::invalid(format!("propagation factor needs s <= t (s = {s}, t = {t})")));
    }
    let last = frame_at(frames, t + 1, "propagation_factor")?;
    let mut z = frame_at(frames, s, "propagation_factor")?.grad_s_perp().clone();
    for frame in &frames[s + 1..=t] {
        z = frame.apply_a(&z, eta)?;
    }
    last.grad_s_perp().dot(&z)
}

/// Closed-form `ŷ_n` after `n` steps:
///
/// `ŷ_n = 𝓘_n + η Σ_s β_{s→n−1}(δ_s² − x̂_s²)/2 − η Σ_s ⟨γ_{s→n−1}, ξ_s⟩`
///
/// with `𝓘_n = (∇S⊥_n)ᵀ A_{n−1} ⋯ A_0 v̂₀` and `γ_{s→t} = (∇S⊥_{t+1})ᵀ A_t ⋯
/// A_{s+1} P⊥_{u_{s+1}}`. For `n = 0` this is `⟨∇S⊥_0, v̂₀⟩`.
///
/// All sums share one backward sweep of `Aᵀ` applied to `∇S⊥_n`.
pub fn unroll_yhat<T: Real, F: CurvatureFrame<T>>(
    n: usize,
    frames: &[F],
    x_hist: &[T],
    xi_hist: &[Vector<T>],
    v0: &Vector<T>,
    eta: T,
) -> Result<T> {
    if frames.len() < n + 1 {
        return Err(Error::InsufficientData {
            what: "frames for unroll_yhat",
            needed: n + 1,
            got: frames.len(),
        });
    }
    if x_hist.len() < n {
        return Err(Error::InsufficientData {
            what: "x_hat history",
            needed: n,
            got: x_hist.len(),
        });
    }
    if xi_hist.len() < n {
        return Err(Error::InsufficientData {
            what: "noise history",
            needed: n,
            got: xi_hist.len(),
        });
    }
    let half = T::lit(0.5);
    let mut w = frames[n].grad_s_perp().clone();
    let mut total = T::zero();
    for s in (0..n).rev() {
        let fs = &frames[s];
        let x = x_hist[s];
        total += half * eta * (fs.delta_sq() - x * x) * w.dot(fs.grad_s_perp())?;
        let xi_perp = xi_hist[s].project_out(frames[s + 1].u())?;
        total -= eta * w.dot(&xi_perp)?;
        w = fs.apply_a_transpose(&w, eta)?;
    }
    Ok(total + w.dot(v0)?)
}
