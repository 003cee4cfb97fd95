mod common;

use quasilinear::dynamics::{invariant_mean, ClosedFormMean, ConstantMean};
use quasilinear::filter::{
    build_measurement, error_cov_trajectory, initial_error_cov, riccati_trajectory, sigma_of_mu, steady_design,
};
use quasilinear::linalg::{min_symmetric_eigenvalue, uniform_grid, RMatrix, RVector, StepPolicy};
use quasilinear::presets;

#[test]
fn riccati_flow_is_dominated_by_every_fixed_gain() {
    let coeffs = common::seeded_coeffs(0);
    let meas = build_measurement(&coeffs, &common::two_outputs()).unwrap();
    let mu0 = RVector::from_vec(vec![0.3, -0.2, 0.4]);
    let mean = ClosedFormMean::new(&coeffs, 0.0, mu0.clone()).unwrap();
    let p0 = initial_error_cov(coeffs.constants(), &mu0).unwrap();
    let grid = uniform_grid(0.0, 2.0, 0.05).unwrap();
    let policy = StepPolicy::Fixed(1e-3);
    let opt = riccati_trajectory(&coeffs, &meas, &p0, &mean, &grid, policy).unwrap();
    let mut rng = presets::rng(5);
    for _ in 0..8 {
        let k = presets::normal_matrix(&mut rng, 3, 2, 1.0);
        let pk = error_cov_trajectory(&coeffs, &meas, &move |_t| k.clone(), &p0, &mean, &grid, policy).unwrap();
        for (a, b) in pk.iter().zip(&opt.p) {
            assert!(min_symmetric_eigenvalue(&(a - b)) >= -1e-8);
            assert!(a.trace() >= b.trace() - 1e-8);
        }
    }
}

#[test]
fn riccati_equals_error_flow_driven_by_its_own_gain() {
    let coeffs = common::seeded_coeffs(1);
    let meas = build_measurement(&coeffs, &common::two_outputs()).unwrap();
    let mu0 = RVector::from_vec(vec![0.0, 0.5, 0.0]);
    let mean = ClosedFormMean::new(&coeffs, 0.0, mu0.clone()).unwrap();
    let p0 = initial_error_cov(coeffs.constants(), &mu0).unwrap();
    let fine = uniform_grid(0.0, 1.0, 1e-3).unwrap();
    let opt = riccati_trajectory(&coeffs, &meas, &p0, &mean, &fine, StepPolicy::Fixed(1e-3)).unwrap();
    // piecewise-linear K*(t); the gain enters P_K only at second order near K*
    let gains = opt.gain.clone();
    let k_of_t = move |t: f64| {
        let x = (t / 1e-3).clamp(0.0, (gains.len() - 1) as f64);
        let i = (x.floor() as usize).min(gains.len() - 2);
        let w = x - i as f64;
        &gains[i] * (1.0 - w) + &gains[i + 1] * w
    };
    let coarse = uniform_grid(0.0, 1.0, 0.1).unwrap();
    let pk = error_cov_trajectory(&coeffs, &meas, &k_of_t, &p0, &mean, &coarse, StepPolicy::Fixed(1e-3)).unwrap();
    for (i, p) in pk.iter().enumerate() {
        let p_opt = &opt.p[i * 100];
        assert!((p - p_opt).norm() <= 1e-7 * (1.0 + p_opt.norm()), "t = {}", coarse[i]);
    }
}

#[test]
fn riccati_converges_to_steady_design() {
    let coeffs = common::seeded_coeffs(2);
    let meas = build_measurement(&coeffs, &common::two_outputs()).unwrap();
    let design = steady_design(&coeffs, &meas).unwrap();
    let mu = invariant_mean(&coeffs).unwrap();
    let p0 = initial_error_cov(coeffs.constants(), &mu).unwrap();
    let grid = uniform_grid(0.0, 40.0, 1.0).unwrap();
    let traj = riccati_trajectory(
        &coeffs,
        &meas,
        &p0,
        &ConstantMean(mu),
        &grid,
        StepPolicy::Adaptive { abs_tol: 1e-12, rel_tol: 1e-10 },
    )
    .unwrap();
    let last = traj.p.last().unwrap();
    assert!((last - &design.p).norm() <= 1e-6 * (1.0 + design.p.norm()));
    assert!(design.closed_loop_abscissa < 0.0);
    assert!(design.method_gap <= 1e-6);
}

#[test]
fn steady_gain_beats_perturbed_gains_at_stationarity() {
    let coeffs = common::seeded_coeffs(3);
    let meas = build_measurement(&coeffs, &common::two_outputs()).unwrap();
    let design = steady_design(&coeffs, &meas).unwrap();
    let sigma = sigma_of_mu(&coeffs, &design.mu).unwrap();
    let bd = coeffs.dispersion(&design.mu).unwrap() * meas.d.transpose();
    let stationary = |k: &RMatrix| {
        let closed = &coeffs.a - k * &meas.c;
        let kbd = k * bd.transpose();
        let q = &sigma - &kbd - kbd.transpose() + k * &meas.f * k.transpose();
        quasilinear::linalg::solve_lyapunov_real(&closed, &q)
    };
    let base = stationary(&design.gain).unwrap();
    assert!((&base - &design.p).norm() <= 1e-8 * (1.0 + base.norm()));
    let mut rng = presets::rng(9);
    for _ in 0..10 {
        let k = &design.gain + presets::normal_matrix(&mut rng, 3, 2, 0.05);
        if let Ok(pk) = stationary(&k) {
            assert!(min_symmetric_eigenvalue(&(pk - &base)) >= -1e-9);
        }
    }
}
