use eoslab_core::landscape::{
    batch_grad, CanonicalCubicSpec, Landscape, MlpSpec, NoiseModel, NoiseSubspace, Sampling, ThirdFormScheme,
};
use eoslab_core::probe::power_law_fit;
use eoslab_core::vecmath::{lanczos_top, LanczosOptions, RngStream, Vector};
use eoslab_core::ParamVector;

fn canonical() -> CanonicalCubicSpec {
    CanonicalCubicSpec {
        noise_cov_scale: 3.0,
        ..CanonicalCubicSpec::default()
    }
}

fn small_mlp() -> MlpSpec {
    MlpSpec {
        input: 4,
        hidden: 8,
        n_samples: 64,
        ..MlpSpec::default()
    }
}

fn vec(v: &[f64]) -> ParamVector {
    Vector::from_slice(v).unwrap()
}

fn rel(a: &ParamVector, b: &ParamVector) -> f64 {
    a.sub(b).unwrap().norm() / b.norm().max(1e-300)
}

#[test]
fn canonical_loss_examples() {
    let h = canonical().build::<f64>().unwrap();
    assert_eq!(h.loss(&ParamVector::zeros(h.dim())).unwrap(), 0.0);
    let h2 = CanonicalCubicSpec {
        h0: 2.0,
        k_bulk: 0,
        ..CanonicalCubicSpec::default()
    }
    .build::<f64>()
    .unwrap();
    assert_eq!(h2.loss(&vec(&[1.0, 0.0])).unwrap(), 1.0);
}

#[test]
fn mlp_loss_vanishes_at_teacher() {
    let h = small_mlp().build::<f64>().unwrap();
    assert!(h.loss(h.teacher_params()).unwrap() <= 1e-20);
}

fn check_average_of_samples(h: &dyn Landscape<f64>, theta: &ParamVector) {
    let n = h.n_samples();
    let mut acc = ParamVector::zeros(h.dim());
    for i in 0..n {
        acc = acc.add(&h.sample_grad(theta, i).unwrap()).unwrap();
    }
    let mean = acc.scale(1.0 / n as f64).unwrap();
    let g = h.grad(theta).unwrap();
    assert!(rel(&mean, &g) <= 1e-10, "relative error {}", rel(&mean, &g));
}

#[test]
fn gradient_is_average_of_sample_gradients() {
    let mut rng = RngStream::new(3, 0);
    let c = canonical().build::<f64>().unwrap();
    check_average_of_samples(&c, &rng.normal_vector(c.dim()));
    let m = small_mlp().build::<f64>().unwrap();
    let theta = m.initial_params().clone();
    check_average_of_samples(&m, &theta);
}

/// Observed order of the central-difference error between two step sizes.
fn gradient_check_order(h: &dyn Landscape<f64>, theta: &ParamVector, d: &ParamVector) -> f64 {
    let exact = h.grad(theta).unwrap().dot(d).unwrap();
    let err = |eps: f64| {
        let fd = (h.loss(&theta.axpy(eps, d).unwrap()).unwrap() - h.loss(&theta.axpy(-eps, d).unwrap()).unwrap())
            / (2.0 * eps);
        (fd - exact).abs()
    };
    (err(1e-3) / err(1e-4)).log10()
}

#[test]
fn gradient_check_is_second_order() {
    let mut rng = RngStream::new(4, 0);
    let c = CanonicalCubicSpec {
        mu: 0.3,
        lam: 0.5,
        ..canonical()
    }
    .build::<f64>()
    .unwrap();
    let theta = rng.normal_vector(c.dim());
    let d = rng.normal_vector(c.dim());
    let order = gradient_check_order(&c, &theta, &d);
    assert!(order >= 1.9, "canonical order {order}");

    let m = small_mlp().build::<f64>().unwrap();
    let theta = m.initial_params().clone();
    let d = rng.normal_vector::<f64>(m.dim()).normalized().unwrap();
    let order = gradient_check_order(&m, &theta, &d);
    assert!(order >= 1.9, "mlp order {order}");
}

#[test]
fn canonical_hessian_at_origin() {
    let spec = canonical();
    let h = spec.build::<f64>().unwrap();
    let origin = ParamVector::zeros(h.dim());
    let ex = ParamVector::basis(h.dim(), 0);
    assert_eq!(h.hvp(&origin, &ex).unwrap(), ex.scale(spec.h0).unwrap());
    let ez = ParamVector::basis(h.dim(), 2);
    assert_eq!(h.hvp(&origin, &ez).unwrap(), ez.scale(spec.rho).unwrap());
}

fn symmetry_error(h: &dyn Landscape<f64>, theta: &ParamVector, rng: &mut RngStream) -> f64 {
    let v = rng.normal_vector::<f64>(h.dim());
    let w = rng.normal_vector::<f64>(h.dim());
    let a = h.hvp(theta, &v).unwrap().dot(&w).unwrap();
    let b = v.dot(&h.hvp(theta, &w).unwrap()).unwrap();
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn hessian_vector_products_are_symmetric() {
    let mut rng = RngStream::new(5, 0);
    let c = CanonicalCubicSpec { mu: 0.2, ..canonical() }.build::<f64>().unwrap();
    for _ in 0..10 {
        let theta = rng.normal_vector(c.dim());
        assert!(symmetry_error(&c, &theta, &mut rng) <= 1e-8);
    }
    let m = small_mlp().build::<f64>().unwrap();
    let theta = m.initial_params().clone();
    for _ in 0..5 {
        assert!(symmetry_error(&m, &theta, &mut rng) <= 1e-6);
    }
}

#[test]
fn canonical_third_form_along_top_direction() {
    let h = canonical().build::<f64>().unwrap();
    let origin = ParamVector::zeros(h.dim());
    let ex = ParamVector::basis(h.dim(), 0);
    assert_eq!(h.third_form(&origin, &ex).unwrap(), ParamVector::basis(h.dim(), 1));
}

#[test]
fn pure_quadratic_has_no_third_derivative() {
    let h = CanonicalCubicSpec {
        alpha0: 0.0,
        coupling: 0.0,
        ..canonical()
    }
    .build::<f64>()
    .unwrap();
    let mut rng = RngStream::new(6, 0);
    let theta = rng.normal_vector::<f64>(h.dim());
    let u = rng.normal_vector::<f64>(h.dim()).normalized().unwrap();
    assert!(h.third_form(&theta, &u).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn mlp_third_form_agrees_across_schemes() {
    let central = small_mlp().build::<f64>().unwrap();
    let forward = MlpSpec {
        third_scheme: ThirdFormScheme::Forward,
        third_rel_step: 1e-4,
        ..small_mlp()
    }
    .build::<f64>()
    .unwrap();
    let theta = central.initial_params().clone();
    let u = lanczos_top(
        |v| central.hvp(&theta, v),
        central.dim(),
        &mut RngStream::new(7, 0),
        &LanczosOptions::default(),
        None,
    )
    .unwrap()
    .vector;
    let a = central.third_form(&theta, &u).unwrap();
    let b = forward.third_form(&theta, &u).unwrap();
    let err = rel(&b, &a);
    println!("central vs forward third form: relative difference {err:.3e}");
    assert!(err <= 1e-3);
}

#[test]
fn canonical_sharpness_is_h0_plus_y() {
    let spec = canonical();
    let h = spec.build::<f64>().unwrap();
    let mut rng = RngStream::new(8, 0);
    for k in 0..10 {
        let mut theta = vec![0.0; h.dim()];
        theta[0] = 1e-4 * (k as f64 - 5.0);
        theta[1] = 5.0 * k as f64 - 20.0;
        for z in theta.iter_mut().skip(2) {
            *z = rng.normal();
        }
        let theta = vec_owned(theta);
        let s = lanczos_top(|v| h.hvp(&theta, v), h.dim(), &mut rng, &LanczosOptions::default(), None)
            .unwrap()
            .value;
        // Exact top eigenvalue of the 2×2 (x, y) block.
        let (a, b, d) = (spec.h0 + theta[1], theta[0], 0.0);
        let exact = 0.5 * (a + d) + (0.25 * (a - d) * (a - d) + b * b).sqrt();
        assert!((s - exact).abs() <= 1e-6, "{s} vs {exact}");
        assert!((s - (spec.h0 + theta[1])).abs() <= 1e-6);
    }
}

fn vec_owned(v: Vec<f64>) -> ParamVector {
    Vector::from_vec(v).unwrap()
}

#[test]
fn full_batch_has_no_noise() {
    let h = canonical().build::<f64>().unwrap();
    let theta = RngStream::new(9, 0).normal_vector::<f64>(h.dim());
    let noise = NoiseModel::new(h.n_samples(), Sampling::WithoutReplacement);
    let bg = batch_grad(&h, &theta, &noise, &mut RngStream::new(9, 1)).unwrap();
    assert!(bg.xi.iter().all(|&v| v == 0.0));
    assert_eq!(bg.g_b, h.grad(&theta).unwrap());
}

#[test]
fn single_sample_with_replacement_is_a_sample_gradient() {
    let h = small_mlp().build::<f64>().unwrap();
    let theta = h.initial_params().clone();
    let noise = NoiseModel::new(1, Sampling::WithReplacement);
    let bg = batch_grad(&h, &theta, &noise, &mut RngStream::new(10, 0)).unwrap();
    assert_eq!(bg.batch.len(), 1);
    let g = h.sample_grad(&theta, bg.batch[0]).unwrap();
    assert!(rel(&bg.g_b, &g) <= 1e-12);
}

fn projected_per_sample_variance(h: &dyn Landscape<f64>, theta: &ParamVector, u: &ParamVector) -> f64 {
    let g = h.grad(theta).unwrap();
    let n = h.n_samples();
    (0..n)
        .map(|i| {
            let d = h.sample_deviation(theta, &g, i).unwrap().dot(u).unwrap();
            d * d
        })
        .sum::<f64>()
        / n as f64
}

#[test]
fn surrogate_noise_covariance_matches_per_sample_covariance() {
    let h = canonical().build::<f64>().unwrap();
    let mut rng = RngStream::new(11, 0);
    let theta = rng.normal_vector::<f64>(h.dim());
    let u = rng.normal_vector::<f64>(h.dim()).normalized().unwrap();
    let b = 16;
    let expected = projected_per_sample_variance(&h, &theta, &u) / b as f64;
    let noise = NoiseModel::new(b, Sampling::GaussianSurrogate);
    let draws: Vec<f64> = (0..10_000)
        .map(|_| batch_grad(&h, &theta, &noise, &mut rng).unwrap().xi.dot(&u).unwrap())
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (draws.len() - 1) as f64;
    assert!((var / expected - 1.0).abs() <= 0.05, "{var} vs {expected}");
}

#[test]
fn noise_has_zero_mean() {
    let h = canonical().build::<f64>().unwrap();
    let mut rng = RngStream::new(12, 0);
    let theta = rng.normal_vector::<f64>(h.dim());
    let u = ParamVector::basis(h.dim(), 0);
    for sampling in [Sampling::WithReplacement, Sampling::WithoutReplacement, Sampling::GaussianSurrogate] {
        let noise = NoiseModel::new(8, sampling);
        let runs = 20_000;
        let draws: Vec<f64> = (0..runs)
            .map(|_| batch_grad(&h, &theta, &noise, &mut rng).unwrap().xi.dot(&u).unwrap())
            .collect();
        let mean = draws.iter().sum::<f64>() / runs as f64;
        let sd = (draws.iter().map(|d| d * d).sum::<f64>() / runs as f64).sqrt();
        assert!(mean.abs() <= 4.0 * sd / (runs as f64).sqrt(), "{sampling:?}: mean {mean}, sd {sd}");
    }
}

#[test]
fn projected_noise_scales_inversely_with_batch_size() {
    let spec = CanonicalCubicSpec {
        noise_cov_scale: 320f64.sqrt(),
        noise_subspace: NoiseSubspace::TopAndBulk,
        ..CanonicalCubicSpec::default()
    };
    let h = spec.build::<f64>().unwrap();
    let theta = spec.threshold_point::<f64>(0.01, 0.0).unwrap();
    let u = ParamVector::basis(h.dim(), 0);
    for sampling in [Sampling::WithReplacement, Sampling::GaussianSurrogate] {
        let mut rng = RngStream::new(13, sampling as u64);
        let mut points = Vec::new();
        for b in [8usize, 16, 32, 64, 128] {
            let noise = NoiseModel::new(b, sampling);
            // Ten independent m = 200 estimates, averaged.
            let est: f64 = (0..10)
                .map(|_| {
                    eoslab_core::probe::projected_noise_variance(&h, &theta, &u, &noise, 200, &mut rng)
                        .unwrap()
                        .value
                })
                .sum::<f64>()
                / 10.0;
            points.push((b as f64, est));
        }
        let fit = power_law_fit(&points).unwrap();
        println!("{sampling:?}: slope {:.4}, r2 {:.4}", fit.slope, fit.r2);
        assert!((fit.slope + 1.0).abs() <= 0.05);
    }
}

#[test]
fn without_replacement_shows_finite_population_factor() {
    let spec = CanonicalCubicSpec {
        noise_cov_scale: 2.0,
        n_samples: 64,
        ..CanonicalCubicSpec::default()
    };
    let h = spec.build::<f64>().unwrap();
    let theta = ParamVector::zeros(h.dim());
    let u = ParamVector::basis(h.dim(), 0);
    let b = 32;
    let n = h.n_samples() as f64;
    let per_sample = projected_per_sample_variance(&h, &theta, &u);
    let expected = per_sample / b as f64 * (n - b as f64) / (n - 1.0);
    let noise = NoiseModel::new(b, Sampling::WithoutReplacement);
    let mut rng = RngStream::new(14, 0);
    let draws: Vec<f64> = (0..20_000)
        .map(|_| batch_grad(&h, &theta, &noise, &mut rng).unwrap().xi.dot(&u).unwrap())
        .collect();
    let var = draws.iter().map(|d| d * d).sum::<f64>() / draws.len() as f64;
    assert!((var / expected - 1.0).abs() <= 0.05, "{var} vs {expected}");
}

#[test]
fn oversized_batch_without_replacement_rejected() {
    let h = canonical().build::<f64>().unwrap();
    let noise = NoiseModel::new(h.n_samples() + 1, Sampling::WithoutReplacement);
    assert!(batch_grad(&h, &ParamVector::zeros(h.dim()), &noise, &mut RngStream::new(0, 0)).is_err());
}

#[test]
fn f32_canonical_smoke() {
    let h = canonical().build::<f32>().unwrap();
    let origin = Vector::<f32>::zeros(h.dim());
    let g = h.grad(&origin).unwrap();
    assert!((g[1] + 0.25).abs() < 1e-6);
}
