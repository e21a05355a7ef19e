use std::sync::Arc;

use hardy_plap::cli::RunConfig;
use hardy_plap::solver::{self, SolveConfig};
use hardy_plap::{make_grid, EnergyFunctional};

fn build(p: f64, lambda: f64, gamma: f64, elements: usize) -> EnergyFunctional {
    let mut cfg = RunConfig::default();
    cfg.p = p;
    cfg.lambda = lambda;
    cfg.gamma = gamma;
    cfg.elements = elements;
    cfg.build().unwrap()
}

#[test]
fn inverse_recovers_known_profiles() {
    for p in [2.0, 2.5] {
        let ef = build(p, 0.0, 0.0, 128);
        let grid = ef.grid().clone();
        for amp in [0.1, 1.0, 10.0] {
            let u: Vec<f64> = grid.nodes()[..ef.dofs()]
                .iter()
                .map(|r| amp * (1.0 - r * r) * (1.0 + (3.0 * r).sin()))
                .collect();
            let w = ef.phi_gradient(&u);
            let back = solver::invert_phi_prime(&w, &ef, &SolveConfig::default()).unwrap();
            let diff: Vec<f64> = back.coeffs().iter().zip(&u).map(|(a, b)| a - b).collect();
            let err = ef.norm_star_coeffs(&diff) / ef.norm_star_coeffs(&u);
            assert!(err < 1e-6, "p {p} amp {amp}: {err}");
        }
    }
}

#[test]
fn inverse_is_continuous_in_the_load() {
    let ef = build(2.5, 0.0, 0.0, 128);
    let cfg = SolveConfig::default();
    let w = vec![1.0; ef.dofs()];
    let base = solver::invert_phi_prime(&w, &ef, &cfg).unwrap();
    let mut last = f64::INFINITY;
    for h in [1e-1, 1e-2, 1e-3] {
        let wh: Vec<f64> = w.iter().enumerate().map(|(i, v)| v + h * (i as f64 * 0.1).cos()).collect();
        let uh = solver::invert_phi_prime(&wh, &ef, &cfg).unwrap();
        let diff: Vec<f64> = uh.coeffs().iter().zip(base.coeffs()).map(|(a, b)| a - b).collect();
        let d = ef.norm_star_coeffs(&diff);
        assert!(d < last);
        last = d;
    }
}

#[test]
fn small_lambda_without_disturbance_only_has_zero() {
    let ef = build(2.0, 0.0, 0.0, 128);
    let beta = solver::estimate_beta(&ef, &SolveConfig::default()).unwrap().beta_hat;
    let ef = ef.with_lambda_gamma(0.5 / beta, 0.0).unwrap();
    let report = solver::find_critical_points(&ef, &SolveConfig::default()).unwrap();
    assert_eq!(report.distinct, 1);
    assert_eq!(report.nontrivial, 0);
    assert!(report.clusters[0].trivial);
}

#[test]
fn beta_ignores_lambda_and_gamma() {
    let cfg = SolveConfig::default();
    let a = solver::estimate_beta(&build(2.0, 0.0, 0.0, 128), &cfg).unwrap();
    let b = solver::estimate_beta(&build(2.0, 7.0, 0.3, 128), &cfg).unwrap();
    assert_eq!(a.beta_hat, b.beta_hat);
    assert!(a.beta_hat >= a.bump_ratio);
}

#[test]
fn single_cell_sweep_matches_direct_solve() {
    let ef = build(2.0, 0.0, 0.0, 64);
    let cfg = SolveConfig::default();
    let table = solver::sweep(&[25.0], &[0.0], &ef, &cfg).unwrap();
    assert_eq!(table.rows.len(), 1);
    let direct = solver::find_critical_points(&ef.with_lambda_gamma(25.0, 0.0).unwrap(), &cfg).unwrap();
    assert_eq!(table.rows[0].distinct, direct.distinct);
    assert_eq!(table.rows[0].nontrivial, direct.nontrivial);
    assert_eq!(table.uniform_bound, direct.max_norm);
}

#[test]
fn sweep_rejects_bad_grids() {
    let ef = build(2.0, 0.0, 0.0, 32);
    let cfg = SolveConfig::default();
    assert!(solver::sweep(&[], &[0.0], &ef, &cfg).is_err());
    assert!(solver::sweep(&[-1.0], &[0.0], &ef, &cfg).is_err());
    assert!(solver::sweep(&[1.0], &[f64::NAN], &ef, &cfg).is_err());
}

#[test]
fn functional_rejects_grid_of_other_radius() {
    let ef = build(2.0, 0.0, 0.0, 32);
    let other = Arc::new(make_grid(32, 0.99, 2.0).unwrap());
    let r = EnergyFunctional::new(ef.params().clone(), other, ef.f().clone(), ef.g().clone());
    assert!(r.is_err());
}
