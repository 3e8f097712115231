use eoslab_core::landscape::{CanonicalCubicSpec, Landscape, MlpSpec};
use eoslab_core::probe::{probe_point, ProbeOptions};
use eoslab_core::refpath::{project_to_m, RefTrajectory, StableSetSpec};
use eoslab_core::vecmath::{lanczos_top, LanczosOptions, RngStream, Vector};
use eoslab_core::ParamVector;

const ETA: f64 = 0.01;

fn spec() -> CanonicalCubicSpec {
    CanonicalCubicSpec::default()
}

fn point(x: f64, y: f64, z: f64) -> ParamVector {
    let mut v = vec![z; spec().dim()];
    v[0] = x;
    v[1] = y;
    Vector::from_vec(v).unwrap()
}

fn y_star() -> f64 {
    spec().stable_y(ETA)
}

#[test]
fn point_in_stable_set_is_fixed() {
    let h = spec().build::<f64>().unwrap();
    let theta = point(0.0, y_star() - 1.0, 0.3);
    let stable = StableSetSpec::new(ETA);
    let p = project_to_m(&theta, &h, &stable, &ProbeOptions::new(ETA), &mut RngStream::new(1, 0), None).unwrap();
    assert_eq!(p.point, theta);
    assert_eq!(p.displacement, 0.0);
    assert!(!p.active);
}

#[test]
fn projection_matches_closed_form_nearest_point() {
    let h = spec().build::<f64>().unwrap();
    let stable = StableSetSpec::new(ETA);
    for (x0, dy) in [(0.3, 0.5), (-0.2, 2.0), (0.05, 0.01)] {
        let theta = point(x0, y_star() + dy, 0.7);
        let p = project_to_m(&theta, &h, &stable, &ProbeOptions::new(ETA), &mut RngStream::new(2, 0), None).unwrap();
        assert!(p.active);
        assert!(p.point[0].abs() <= 1e-8, "x = {}", p.point[0]);
        assert!((p.point[1] - y_star()).abs() <= stable.tol_sharp, "y = {}", p.point[1]);
        for z in p.point.iter().skip(2) {
            assert_eq!(*z, 0.7);
        }
    }
}

#[test]
fn reference_step_keeps_threshold_and_contracts_bulk() {
    let s = spec();
    let h = s.build::<f64>().unwrap();
    let z0 = 0.8;
    let stable = StableSetSpec::new(ETA);
    let mut rng = RngStream::new(3, 0);
    let mut traj = RefTrajectory::start(&h, &point(0.0, y_star(), z0), stable, ProbeOptions::new(ETA), &mut rng).unwrap();
    traj.advance(&h, &mut rng).unwrap();
    let next = &traj.points[1];
    assert!(next[0].abs() <= 1e-12);
    assert!((next[1] - y_star()).abs() <= stable.tol_sharp);
    for z in next.iter().skip(2) {
        assert!((z - z0 * (1.0 - ETA * s.rho)).abs() <= 1e-12);
    }
}

#[test]
fn stationary_point_stays_put() {
    let s = CanonicalCubicSpec {
        alpha0: 0.0,
        ..spec()
    };
    let h = s.build::<f64>().unwrap();
    let theta = point(0.0, y_star() - 3.0, 0.0);
    assert!(h.grad(&theta).unwrap().iter().all(|&g| g == 0.0));
    let mut rng = RngStream::new(4, 0);
    let mut traj = RefTrajectory::start(&h, &theta, StableSetSpec::new(ETA), ProbeOptions::new(ETA), &mut rng).unwrap();
    traj.extend(&h, 5, &mut rng).unwrap();
    assert!(traj.points.iter().all(|p| *p == theta));
}

#[test]
fn two_hundred_steps_descend_and_hold_the_threshold() {
    let h = spec().build::<f64>().unwrap();
    let stable = StableSetSpec::new(ETA);
    let mut rng = RngStream::new(5, 0);
    let start = point(0.4, y_star() - 0.25, 0.5);
    let mut traj = RefTrajectory::start(&h, &start, stable, ProbeOptions::new(ETA), &mut rng).unwrap();
    traj.extend(&h, 200, &mut rng).unwrap();
    assert_eq!(traj.len(), 201);

    for r in &traj.reports {
        assert!(stable.contains(r));
    }
    for w in traj.reports.windows(2) {
        assert!(w[1].loss <= w[0].loss + 1e-9 * w[0].loss.abs(), "{} -> {}", w[0].loss, w[1].loss);
    }
    let first = traj.steps.iter().position(|s| s.active).expect("constraint activates") + 1;
    assert!(first < 200);
    for r in &traj.reports[first..] {
        assert!((r.sharpness - stable.threshold()).abs() <= stable.tol_sharp);
    }
}

#[test]
fn inactive_phase_only_aligns() {
    let h = spec().build::<f64>().unwrap();
    let stable = StableSetSpec::new(ETA);
    let theta = point(0.4, y_star() - 5.0, 0.0);
    let p = project_to_m(&theta, &h, &stable, &ProbeOptions::new(ETA), &mut RngStream::new(6, 0), None).unwrap();
    assert!(!p.active);
    assert!(p.report.sharpness < stable.threshold());
    assert!(p.point[0].abs() <= 1e-8);
}

#[test]
fn mlp_point_past_threshold_lands_on_it() {
    let m = MlpSpec {
        input: 4,
        hidden: 8,
        n_samples: 64,
        ..MlpSpec::default()
    }
    .build::<f64>()
    .unwrap();
    let theta = m.initial_params().clone();
    let mut rng = RngStream::new(7, 0);
    let s0 = lanczos_top(|v| m.hvp(&theta, v), m.dim(), &mut rng, &LanczosOptions::default(), None)
        .unwrap()
        .value;
    // Threshold 1% below the current sharpness.
    let eta = 2.0 / (0.99 * s0);
    let stable = StableSetSpec::new(eta);
    let opts = ProbeOptions::new(eta);
    let p = project_to_m(&theta, &m, &stable, &opts, &mut rng, None).unwrap();
    assert!(p.active);
    let s = probe_point(&m, &p.point, &opts, &mut rng, None).unwrap().sharpness;
    println!("MLP projection: S {s0:.6} -> {s:.9}, threshold {:.9}, {} iterations", stable.threshold(), p.iterations);
    assert!((s - stable.threshold()).abs() <= stable.tol_sharp);
}
