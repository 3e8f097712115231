use eoslab_core::landscape::{CanonicalCubicSpec, Landscape, MlpSpec, NoiseModel, NoiseSubspace, Sampling};
use eoslab_core::predicted::{simulate_ensemble, ReducedCoeffs, ReducedState};
use eoslab_core::probe::{
    batch_sharpness, coupling_run, decorrelation_residual, equilibrium_sharpness, power_law_fit, probe_point,
    projected_noise_variance, CouplingOptions, ProbeOptions,
};
use eoslab_core::vecmath::{RngStream, Vector};
use eoslab_core::{Error, ParamVector};
use nalgebra::{DMatrix, DVector};

const ETA: f64 = 0.01;

fn canonical(noise: f64) -> CanonicalCubicSpec {
    CanonicalCubicSpec {
        noise_cov_scale: noise,
        ..CanonicalCubicSpec::default()
    }
}

fn basis(i: usize, dim: usize) -> ParamVector {
    ParamVector::basis(dim, i)
}

#[test]
fn canonical_report_at_origin() {
    let h = canonical(0.0).build::<f64>().unwrap();
    let theta = ParamVector::zeros(h.dim());
    let r = probe_point(&h, &theta, &ProbeOptions::new(ETA), &mut RngStream::new(1, 0), None).unwrap();
    assert!((r.sharpness - 180.0).abs() <= 1e-9);
    assert!((r.u.dot(&basis(0, h.dim())).unwrap().abs() - 1.0).abs() <= 1e-10);
    assert!((r.alpha - 0.25).abs() <= 1e-10);
    assert!((r.beta - 1.0).abs() <= 1e-10);
    assert!(r.kappa.abs() <= 1e-10);
    assert!((r.delta - 0.5f64.sqrt()).abs() <= 1e-10);
    assert!((r.epsilon - 0.005).abs() <= 1e-12);
}

#[test]
fn uncoupled_quadratic_has_no_sharpness_gradient() {
    let h = CanonicalCubicSpec {
        coupling: 0.0,
        ..canonical(0.0)
    }
    .build::<f64>()
    .unwrap();
    let mut v = vec![0.2; h.dim()];
    v[1] = 3.0;
    let theta = Vector::from_vec(v).unwrap();
    let r = probe_point(&h, &theta, &ProbeOptions::new(ETA), &mut RngStream::new(2, 0), None).unwrap();
    assert_eq!(r.grad_s.norm(), 0.0);
    assert_eq!(r.alpha, 0.0);
    assert_eq!(r.beta, 0.0);
    assert_eq!(r.delta, 0.0);
    assert!(r.alpha_nonpositive);
}

#[test]
fn sharpness_gradient_points_along_y() {
    let h = canonical(0.0).build::<f64>().unwrap();
    let theta = canonical(0.0).threshold_point::<f64>(ETA, 0.0).unwrap();
    let r = probe_point(&h, &theta, &ProbeOptions::new(ETA), &mut RngStream::new(3, 0), None).unwrap();
    let e_y = basis(1, h.dim());
    let cos = r.grad_s.dot(&e_y).unwrap() / r.grad_s.norm();
    assert!(cos.clamp(-1.0, 1.0).acos() <= 1e-6, "angle {}", cos.acos());
    assert!((r.grad_s.norm() - 1.0).abs() <= 1e-4);
    assert!((r.sharpness - 2.0 / ETA).abs() <= 1e-8 * 200.0);
}

#[test]
fn mlp_report_decomposes_sharpness_gradient() {
    let h = MlpSpec {
        input: 4,
        hidden: 8,
        n_samples: 64,
        ..MlpSpec::default()
    }
    .build::<f64>()
    .unwrap();
    let theta = h.initial_params().clone();
    let r = probe_point(&h, &theta, &ProbeOptions::new(0.5), &mut RngStream::new(4, 0), None).unwrap();
    let lhs = r.grad_s.norm_sq();
    assert!((lhs - (r.kappa * r.kappa + r.beta)).abs() <= 1e-8 * lhs.max(1.0));
    assert!(r.grad_s_perp.dot(&r.u).unwrap().abs() <= 1e-10 * r.grad_s.norm().max(1.0));
    assert!((r.grad_s.dot(&r.u).unwrap() - r.kappa).abs() <= 1e-12 * r.grad_s.norm().max(1.0));
    assert!((r.alpha + r.grad.dot(&r.grad_s).unwrap()).abs() <= 1e-12 * r.alpha.abs().max(1.0));
    if r.alpha > 0.0 {
        assert!((r.delta - (2.0 * r.alpha / r.beta).sqrt()).abs() <= 1e-12 * r.delta);
        assert!((r.epsilon - 0.5 * r.alpha.sqrt()).abs() <= 1e-12 * r.epsilon);
    }
}

#[test]
fn noise_variance_ignores_eigenvector_sign() {
    let h = canonical(3.0).build::<f64>().unwrap();
    let theta = ParamVector::zeros(h.dim());
    let u = basis(0, h.dim());
    let noise = NoiseModel::new(16, Sampling::WithReplacement);
    let a = projected_noise_variance(&h, &theta, &u, &noise, 100, &mut RngStream::new(5, 0)).unwrap();
    let b = projected_noise_variance(&h, &theta, &u.neg(), &noise, 100, &mut RngStream::new(5, 0)).unwrap();
    assert_eq!(a.value, b.value);
}

#[test]
fn full_batch_has_no_noise() {
    let h = canonical(3.0).build::<f64>().unwrap();
    let theta = ParamVector::zeros(h.dim());
    let noise = NoiseModel::full_batch(h.n_samples());
    let v = projected_noise_variance(&h, &theta, &basis(0, h.dim()), &noise, 20, &mut RngStream::new(6, 0)).unwrap();
    assert_eq!(v.value, 0.0);
    assert!(v.degenerate);
}

#[test]
fn surrogate_variance_matches_covariance() {
    // Per-sample covariance is 9·I on the noise subspace, so σ_u² = 9/b.
    let h = canonical(3.0).build::<f64>().unwrap();
    let theta = ParamVector::zeros(h.dim());
    let m = 2000;
    let b = 8;
    let noise = NoiseModel::new(b, Sampling::GaussianSurrogate);
    let v = projected_noise_variance(&h, &theta, &basis(0, h.dim()), &noise, m, &mut RngStream::new(7, 0)).unwrap();
    let expected = 9.0 / b as f64;
    let se = expected * (2.0 / (m - 1) as f64).sqrt();
    assert!((v.value - expected).abs() <= 3.0 * se, "{} vs {expected} ± {se}", v.value);
}

/// Least-squares `log10 y = a + s·log10 x` through the normal equations.
fn normal_equations_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let x = DMatrix::from_fn(points.len(), 2, |i, j| if j == 0 { 1.0 } else { points[i].0.log10() });
    let y = DVector::from_iterator(points.len(), points.iter().map(|p| p.1.log10()));
    let xt = x.transpose();
    let coef = (&xt * &x).try_inverse().unwrap() * (xt * y);
    (coef[1], coef[0])
}

#[test]
fn power_law_recovers_slope_under_small_noise() {
    let mut rng = RngStream::new(8, 0);
    let points: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0, 128.0]
        .iter()
        .map(|&x: &f64| (x, 40.0 * x.powf(-1.27) * (1.0 + 0.01 * rng.normal::<f64>())))
        .collect();
    let fit = power_law_fit(&points).unwrap();
    let (slope, intercept) = normal_equations_fit(&points);
    assert!((fit.slope - slope).abs() <= 1e-12);
    assert!((fit.intercept - intercept).abs() <= 1e-12);
    assert!((fit.slope + 1.27).abs() <= 0.05);
    assert!(fit.r2 > 0.99);
}

#[test]
fn power_law_is_scale_equivariant() {
    let points = [(1.0, 3.0), (2.0, 1.7), (4.0, 0.8), (8.0, 0.45)];
    let scaled: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x, 1000.0 * y)).collect();
    let a = power_law_fit(&points).unwrap();
    let b = power_law_fit(&scaled).unwrap();
    assert!((a.slope - b.slope).abs() <= 1e-12);
    assert!((b.intercept - a.intercept - 3.0).abs() <= 1e-12);
}

#[test]
fn power_law_rejects_bad_input() {
    assert!(power_law_fit(&[(1.0, 1.0)]).is_err());
    assert!(matches!(
        power_law_fit(&[(1.0, 1.0), (2.0, -1.0), (4.0, 0.5)]),
        Err(Error::NonPositive { .. })
    ));
}

#[test]
fn equilibrium_sharpness_examples() {
    let constant: Vec<(usize, f64)> = (0..50).map(|t| (t, 200.0)).collect();
    assert_eq!(equilibrium_sharpness(&constant).unwrap(), 200.0);
    let saw: Vec<(usize, f64)> = (0..60).map(|t| (t, if t % 2 == 0 { 190.0 } else { 200.0 })).collect();
    assert!((equilibrium_sharpness(&saw).unwrap() - 195.0).abs() <= 1e-12);
    assert!(equilibrium_sharpness(&constant[..5]).is_err());
}

#[test]
fn full_batch_sharpness_is_rayleigh_quotient() {
    let h = canonical(3.0).build::<f64>().unwrap();
    let theta = canonical(3.0).threshold_point::<f64>(ETA, 0.4).unwrap().axpy(0.3, &basis(4, h.dim())).unwrap();
    let noise = NoiseModel::full_batch(h.n_samples());
    let bs = batch_sharpness(&h, &theta, &noise, 3, &mut RngStream::new(9, 0)).unwrap();
    let g = h.grad(&theta).unwrap();
    let rq = g.dot(&h.hvp(&theta, &g).unwrap()).unwrap() / g.norm_sq();
    assert!((bs.mean - rq).abs() <= 1e-10 * rq);
    let s = probe_point(&h, &theta, &ProbeOptions::new(ETA), &mut RngStream::new(9, 1), None).unwrap().sharpness;
    assert!(bs.mean <= s * (1.0 + 1e-10));
}

#[test]
fn surrogate_batch_sharpness_matches_monte_carlo() {
    // Quadratic: H = diag(h0, 0, ρ, …, ρ); noise 9/b·I on x and z.
    let spec = CanonicalCubicSpec {
        coupling: 0.0,
        ..canonical(3.0)
    };
    let h = spec.build::<f64>().unwrap();
    let mut v = vec![0.3; h.dim()];
    v[0] = 0.01;
    v[1] = 0.0;
    let theta = Vector::from_vec(v).unwrap();
    let b = 16;
    let m = 4000;
    let noise = NoiseModel::new(b, Sampling::GaussianSurrogate);
    let got = batch_sharpness(&h, &theta, &noise, m, &mut RngStream::new(10, 0)).unwrap();

    let g = h.grad(&theta).unwrap();
    let diag: Vec<f64> = (0..h.dim()).map(|i| if i == 0 { spec.h0 } else if i == 1 { spec.lam } else { spec.rho }).collect();
    let sd = 3.0 / (b as f64).sqrt();
    let mut rng = RngStream::new(10, 1);
    let vals: Vec<f64> = (0..m)
        .map(|_| {
            let gb: Vec<f64> = g.iter().enumerate().map(|(i, gi)| if i == 1 { *gi } else { gi + sd * rng.normal::<f64>() }).collect();
            let num: f64 = gb.iter().zip(&diag).map(|(x, d)| d * x * x).sum();
            num / gb.iter().map(|x| x * x).sum::<f64>()
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / m as f64;
    let se = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / ((m - 1) * m) as f64).sqrt();
    let pooled = (se * se + got.stderr * got.stderr).sqrt();
    assert!((got.mean - mean).abs() <= 4.0 * pooled, "{} vs {mean} ± {pooled}", got.mean);
}

#[test]
fn decorrelation_vanishes_for_identical_members() {
    let ens = vec![ReducedState::new(0.7, -3.0); 100];
    let d = decorrelation_residual(&ens, ETA).unwrap();
    assert!(d.abs_residual <= 1e-15 * d.lhs);
}

#[test]
fn decorrelation_small_for_independent_coordinates() {
    let mut rng = RngStream::new(11, 0);
    let ens: Vec<_> = (0..20000).map(|_| ReducedState::new(rng.normal::<f64>(), 5.0 * rng.normal::<f64>())).collect();
    let d = decorrelation_residual(&ens, ETA).unwrap();
    assert!(d.abs_residual <= 0.02 * d.lhs, "{} of {}", d.abs_residual, d.lhs);
}

#[test]
fn decorrelation_needs_an_ensemble() {
    let ens = vec![ReducedState::new(0.7, -3.0); 10];
    assert!(decorrelation_residual(&ens, ETA).is_err());
}

fn coupling_spec() -> CanonicalCubicSpec {
    CanonicalCubicSpec {
        h0: 200.0,
        mu: 0.05,
        ..CanonicalCubicSpec::default()
    }
}

#[test]
fn coupling_runs_repeat_and_start_on_the_prediction() {
    let spec = coupling_spec();
    let h = spec.build::<f64>().unwrap();
    let theta0 = spec.threshold_point::<f64>(ETA, 0.0).unwrap();
    let opts = CouplingOptions::new(ETA, NoiseModel::full_batch(h.n_samples()), 50);
    let a = coupling_run(&h, &theta0, &opts, &RngStream::new(12, 0)).unwrap();
    let b = coupling_run(&h, &theta0, &opts, &RngStream::new(12, 0)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.records[0].deviation, 0.0);
    assert!(a.diverged_at.is_none());
}

#[test]
fn noisy_coupling_stays_within_a_few_delta() {
    let spec = CanonicalCubicSpec {
        noise_cov_scale: 4.0,
        noise_subspace: NoiseSubspace::Top,
        ..coupling_spec()
    };
    let h = spec.build::<f64>().unwrap();
    let theta0 = spec.threshold_point::<f64>(ETA, 0.0).unwrap();
    let opts = CouplingOptions::new(ETA, NoiseModel::new(32, Sampling::WithReplacement), 300);
    let (mut outside, mut total) = (0usize, 0usize);
    for k in 0..4 {
        let run = coupling_run(&h, &theta0, &opts, &RngStream::new(13, k)).unwrap();
        assert!(run.diverged_at.is_none());
        total += run.records.len();
        outside += run.records.iter().filter(|r| r.norm_v > 5.0 * run.delta0).count();
    }
    assert!((outside as f64) < 0.01 * total as f64, "{outside} of {total} beyond 5δ");
}

#[test]
fn decorrelation_residual_small_at_equilibrium() {
    let c = ReducedCoeffs::new(ETA, 1.0, 0.5, 0.0, 10.0).unwrap();
    let runs = simulate_ensemble(
        ReducedState::new(1.0, 0.0),
        &c,
        100,
        5000,
        1e3 * c.delta(),
        &RngStream::new(14, 0),
    )
    .unwrap();
    let ens: Vec<_> = runs.iter().filter(|r| r.diverged_at.is_none()).map(|r| *r.states.last().unwrap()).collect();
    let d = decorrelation_residual(&ens, ETA).unwrap();
    let eps2_delta2 = (ETA * ETA * c.alpha()) * c.delta_sq;
    println!(
        "decorrelation at sigma_u^2 = 10: |lhs - rhs| / lhs = {:.2e}, |lhs - rhs| / (eps^2 delta^2) = {:.1}",
        d.abs_residual / d.lhs,
        d.abs_residual / eps2_delta2
    );
    assert!(d.abs_residual <= 0.1 * d.lhs);
}
