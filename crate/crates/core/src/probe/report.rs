use crate::error::Result;
use crate::landscape::{check_dim, Derivative, Landscape};
use crate::predicted::CurvatureFrame;
use crate::scalar::Real;
use crate::vecmath::{lanczos_deflated, lanczos_top, LanczosDiagnostics, LanczosOptions, RngStream, Vector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeOptions<T> {
    pub eta: T,
    pub lanczos: LanczosOptions<T>,
    /// Also compute `λ₂` by deflated Lanczos for the eigengap ratio.
    pub eigengap: bool,
}

impl<T: Real> ProbeOptions<T> {
    pub fn new(eta: T) -> Self {
        Self {
            eta,
            lanczos: LanczosOptions::default(),
            eigengap: false,
        }
    }

    pub fn with_eigengap(mut self) -> Self {
        self.eigengap = true;
        self
    }
}

/// Smallest Lanczos residual tolerance used with finite-difference
/// Hessian-vector products. The difference quotient is linear in its argument
/// only to about `1e-8` relative, which sets the attainable residual.
pub const FD_LANCZOS_TOL: f64 = 1e-6;

/// `opts` with the tolerance raised to [`FD_LANCZOS_TOL`] when `h` computes
/// Hessian-vector products by finite differences.
pub fn lanczos_options_for<T: Real, L: Landscape<T> + ?Sized>(h: &L, opts: &LanczosOptions<T>) -> LanczosOptions<T> {
    let mut o = *opts;
    if h.exactness().hvp == Derivative::FiniteDifference {
        o.tol = o.tol.max(T::lit(FD_LANCZOS_TOL));
    }
    o
}

/// Local landscape quantities at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct LandscapeReport<T> {
    pub at: Vector<T>,
    pub loss: T,
    pub grad: Vector<T>,
    /// `S = λ_max(∇²L)`.
    pub sharpness: T,
    pub u: Vector<T>,
    /// `∇S = ∇³L(u, u)`.
    pub grad_s: Vector<T>,
    pub grad_s_perp: Vector<T>,
    /// `−⟨∇L, ∇S⟩`.
    pub alpha: T,
    /// `‖∇S⊥‖²`.
    pub beta: T,
    /// `√(2α/β)`, or 0 when `α ≤ 0` or `β = 0`.
    pub delta: T,
    /// `η√max(α, 0)`.
    pub epsilon: T,
    /// `⟨∇S, u⟩`.
    pub kappa: T,
    pub eta: T,
    /// `λ₂·η/2`, when requested.
    pub eigengap_ratio: Option<T>,
    pub second_eigenvalue: Option<T>,
    pub alpha_nonpositive: bool,
    pub degenerate: bool,
    pub lanczos: LanczosDiagnostics<T>,
}

impl<T: Real> LandscapeReport<T> {
    /// `⟨∇L, u⟩`.
    pub fn align(&self) -> T {
        crate::vecmath::dot_slices(self.grad.as_slice(), self.u.as_slice())
    }

    pub fn delta_sq(&self) -> T {
        self.delta * self.delta
    }

    pub fn threshold(&self) -> T {
        T::lit(2.0) / self.eta
    }
}

/// `(δ, ε)` from `(α, β, η)`; both zero without progressive sharpening.
pub fn delta_epsilon<T: Real>(alpha: T, beta: T, eta: T) -> (T, T) {
    let two = T::lit(2.0);
    if alpha > T::zero() && beta > T::zero() {
        ((two * alpha / beta).sqrt(), eta * alpha.sqrt())
    } else if alpha > T::zero() {
        (T::zero(), eta * alpha.sqrt())
    } else {
        (T::zero(), T::zero())
    }
}

/// Measures every quantity of [`LandscapeReport`] at `theta`. The eigenvector
/// is oriented against `reference` when given.
pub fn probe_point<T: Real, L: Landscape<T> + ?Sized>(
    h: &L,
    theta: &Vector<T>,
    opts: &ProbeOptions<T>,
    rng: &mut RngStream,
    reference: Option<&Vector<T>>,
) -> Result<LandscapeReport<T>> {
    check_dim("probe_point", h.dim(), theta)?;
    let loss = h.loss(theta)?;
    let grad = h.grad(theta)?;
    let lanczos = lanczos_options_for(h, &opts.lanczos);
    let eig = lanczos_top(|v| h.hvp(theta, v), h.dim(), rng, &lanczos, reference)?;
    let u = eig.vector;
    let grad_s = h.third_form(theta, &u)?;
    let kappa = grad_s.dot(&u)?;
    let grad_s_perp = grad_s.axpy(-kappa, &u)?;
    let beta = grad_s_perp.norm_sq();
    let alpha = -grad.dot(&grad_s)?;
    let (delta, epsilon) = delta_epsilon(alpha, beta, opts.eta);

    let mut degenerate = eig.diagnostics.degenerate;
    let (second_eigenvalue, eigengap_ratio) = if opts.eigengap && h.dim() >= 2 {
        let second = lanczos_deflated(|v| h.hvp(theta, v), h.dim(), rng, &lanczos, &u)?;
        let gap_tol = T::lit(crate::vecmath::DEGENERATE_GAP) * eig.value.abs().max(T::one());
        degenerate |= (eig.value - second.value).abs() <= gap_tol;
        (Some(second.value), Some(second.value * opts.eta / T::lit(2.0)))
    } else {
        (None, None)
    };

    Ok(LandscapeReport {
        at: theta.clone(),
        loss,
        grad,
        sharpness: eig.value,
        u,
        grad_s,
        grad_s_perp,
        alpha,
        beta,
        delta,
        epsilon,
        kappa,
        eta: opts.eta,
        eigengap_ratio,
        second_eigenvalue,
        alpha_nonpositive: !(alpha > T::zero()),
        degenerate,
        lanczos: eig.diagnostics,
    })
}

/// A report paired with its landscape so the vector recursion can apply the
/// Hessian at the probed point.
pub struct ProbedFrame<'a, T, L: ?Sized> {
    pub report: &'a LandscapeReport<T>,
    pub landscape: &'a L,
}

impl<'a, T: Real, L: Landscape<T> + ?Sized> ProbedFrame<'a, T, L> {
    pub fn new(report: &'a LandscapeReport<T>, landscape: &'a L) -> Self {
        Self { report, landscape }
    }
}

impl<T: Real, L: Landscape<T> + ?Sized> CurvatureFrame<T> for ProbedFrame<'_, T, L> {
    fn u(&self) -> &Vector<T> {
        &self.report.u
    }

    fn grad_s_perp(&self) -> &Vector<T> {
        &self.report.grad_s_perp
    }

    fn delta_sq(&self) -> T {
        self.report.delta_sq()
    }

    fn kappa(&self) -> T {
        self.report.kappa
    }

    fn apply_hessian(&self, v: &Vector<T>) -> Result<Vector<T>> {
        self.landscape.hvp(&self.report.at, v)
    }
}
