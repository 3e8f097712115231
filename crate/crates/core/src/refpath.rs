//! Projected gradient descent on the stable set
//! `𝓜 = {S(θ) ≤ 2/η, ⟨∇L(θ), u(θ)⟩ = 0}`.

use crate::error::{Error, Result};
use crate::landscape::Landscape;
use crate::probe::{probe_point, LandscapeReport, ProbeOptions};
use crate::scalar::Real;
use crate::vecmath::{RngStream, Vector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StableSetSpec<T> {
    pub eta: T,
    pub tol_sharp: T,
    /// Relative to `‖∇L‖`.
    pub tol_align: T,
    pub max_proj_iters: usize,
}

impl<T: Real> StableSetSpec<T> {
    /// Defaults: `tol_sharp = 1e-6·(2/η)`, `tol_align = 1e-8`, 50 iterations.
    pub fn new(eta: T) -> Self {
        Self {
            eta,
            tol_sharp: T::lit(1e-6) * T::lit(2.0) / eta,
            tol_align: T::lit(1e-8),
            max_proj_iters: 50,
        }
    }

    pub fn threshold(&self) -> T {
        T::lit(2.0) / self.eta
    }

    pub fn sharp_residual(&self, r: &LandscapeReport<T>) -> T {
        r.sharpness - self.threshold()
    }

    fn align_ok(&self, r: &LandscapeReport<T>) -> bool {
        r.align().abs() <= self.tol_align * r.grad.norm()
    }

    /// Membership predicate of the stable set.
    pub fn contains(&self, r: &LandscapeReport<T>) -> bool {
        self.sharp_residual(r) <= self.tol_sharp && self.align_ok(r)
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > T::zero() && self.tol_sharp > T::zero() && self.tol_align > T::zero()) {
            return Err(Error::invalid("stable-set spec needs eta, tol_sharp, tol_align > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection<T> {
    pub point: Vector<T>,
    /// `‖point − θ‖`.
    pub displacement: T,
    pub iterations: usize,
    /// The sharpness constraint was binding (`S(θ) > 2/η`), so the result
    /// sits on `S = 2/η`.
    pub active: bool,
    pub report: LandscapeReport<T>,
}

/// Moves `theta` onto the stable set by alternating corrections.
///
/// Sharpness: `θ ← θ − s·(S − 2/η)·∇S/‖∇S‖²` with damping `s` halved whenever
/// the residual changes sign. Alignment: `θ ← θ − (⟨∇L, u⟩/S)·u`. When the
/// sharpness constraint binds at `theta` the result is driven to `S = 2/η`
/// from either side; otherwise only the alignment correction runs.
pub fn project_to_m<T: Real, L: Landscape<T> + ?Sized>(
    theta: &Vector<T>,
    h: &L,
    spec: &StableSetSpec<T>,
    opts: &ProbeOptions<T>,
    rng: &mut RngStream,
    reference: Option<&Vector<T>>,
) -> Result<Projection<T>> {
    spec.validate()?;
    let mut report = probe_point(h, theta, opts, rng, reference)?;
    let active = spec.sharp_residual(&report) > spec.tol_sharp;
    let sharp_ok = |r: &LandscapeReport<T>| {
        let res = spec.sharp_residual(r);
        if active {
            res.abs() <= spec.tol_sharp
        } else {
            res <= spec.tol_sharp
        }
    };
    let mut damping = T::one();
    let mut last_sign: Option<bool> = None;
    let mut iterations = 0;
    while !(sharp_ok(&report) && spec.align_ok(&report)) {
        if iterations == spec.max_proj_iters {
            return Err(Error::ProjectionFailed {
                iterations,
                sharp_residual: spec.sharp_residual(&report).as_f64(),
                align_residual: report.align().as_f64(),
            });
        }
        iterations += 1;
        let mut current = report.at.clone();
        let res = spec.sharp_residual(&report);
        if !sharp_ok(&report) {
            let positive = res > T::zero();
            if last_sign.is_some_and(|s| s != positive) {
                damping = damping * T::lit(0.5);
            }
            last_sign = Some(positive);
            let gs_sq = report.grad_s.norm_sq();
            if gs_sq == T::zero() {
                return Err(Error::ProjectionFailed {
                    iterations,
                    sharp_residual: res.as_f64(),
                    align_residual: report.align().as_f64(),
                });
            }
            current = current.axpy(-damping * res / gs_sq, &report.grad_s)?;
            report = probe_point(h, &current, opts, rng, Some(&report.u))?;
        }
        if !spec.align_ok(&report) {
            current = current.axpy(-report.align() / report.sharpness, &report.u)?;
            report = probe_point(h, &current, opts, rng, Some(&report.u))?;
        }
    }
    Ok(Projection {
        displacement: report.at.sub(theta)?.norm(),
        point: report.at.clone(),
        iterations,
        active,
        report,
    })
}

/// Bookkeeping for one reference step `t → t + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct RefStep<T> {
    pub displacement: T,
    pub proj_iterations: usize,
    pub active: bool,
    /// `‖θ†_t − ηP⊥_{u,∇S}∇L − θ†_{t+1}‖`, the error of the projected-gradient
    /// approximation of the step.
    pub approx_discrepancy: T,
}

/// Reference trajectory `θ†_{t+1} = proj_𝓜(θ†_t − η∇L(θ†_t))`.
#[derive(Clone, Debug)]
pub struct RefTrajectory<T> {
    pub spec: StableSetSpec<T>,
    pub opts: ProbeOptions<T>,
    pub points: Vec<Vector<T>>,
    pub reports: Vec<LandscapeReport<T>>,
    pub steps: Vec<RefStep<T>>,
}

impl<T: Real> RefTrajectory<T> {
    /// Starts at `proj_𝓜(theta0)`.
    pub fn start<L: Landscape<T> + ?Sized>(
        h: &L,
        theta0: &Vector<T>,
        spec: StableSetSpec<T>,
        opts: ProbeOptions<T>,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let p = project_to_m(theta0, h, &spec, &opts, rng, None)?;
        Ok(Self {
            spec,
            opts,
            points: vec![p.point],
            reports: vec![p.report],
            steps: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last_report(&self) -> &LandscapeReport<T> {
        self.reports.last().expect("trajectory is never empty")
    }

    /// Appends the next reference point.
    pub fn advance<L: Landscape<T> + ?Sized>(&mut self, h: &L, rng: &mut RngStream) -> Result<&LandscapeReport<T>> {
        let cur = self.last_report().clone();
        let eta = self.spec.eta;
        let stepped = cur.at.axpy(-eta, &cur.grad)?;
        let p = project_to_m(&stepped, h, &self.spec, &self.opts, rng, Some(&cur.u))?;

        // Gradient with its components along u and ∇S⊥ removed.
        let mut pg = cur.grad.project_out(&cur.u)?;
        let perp_norm = cur.grad_s_perp.norm();
        if perp_norm > T::zero() {
            let dir = cur.grad_s_perp.scale(T::one() / perp_norm)?;
            pg = pg.project_out(&dir)?;
        }
        let approx = cur.at.axpy(-eta, &pg)?;
        self.steps.push(RefStep {
            displacement: p.displacement,
            proj_iterations: p.iterations,
            active: p.active,
            approx_discrepancy: approx.sub(&p.point)?.norm(),
        });
        self.points.push(p.point);
        self.reports.push(p.report);
        Ok(self.last_report())
    }

    /// Runs `steps` reference steps from the current end.
    pub fn extend<L: Landscape<T> + ?Sized>(&mut self, h: &L, steps: usize, rng: &mut RngStream) -> Result<()> {
        for _ in 0..steps {
            self.advance(h, rng)?;
        }
        Ok(())
    }
}
