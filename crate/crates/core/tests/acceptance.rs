//! Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hardy_plap::analysis::{chabrowski_check, monotonicity_gap};
use hardy_plap::nonlinear::{check_f1, check_f2, check_f3, check_g1, example_f, example_g, ExampleParams};
use hardy_plap::solver::{estimate_beta, find_critical_points, invert_phi_prime, sweep, SolveConfig};
use hardy_plap::types::chabrowski_constant;
use hardy_plap::{make_grid, DiscreteFunction, EnergyFunctional, EnergyParams, RadialGrid};

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!("ACCEPTANCE {id:>2} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
}

fn functional(p: f64, n: u32, mu: f64, lambda: f64, grid: Arc<RadialGrid>) -> EnergyFunctional {
    let params = EnergyParams::new(p, n, mu, lambda, 0.0, 1.0).unwrap();
    let ex = ExampleParams::default();
    EnergyFunctional::new(params, grid, example_f(&ex, p).unwrap(), example_g(&ex).unwrap()).unwrap()
}

fn default_grid() -> Arc<RadialGrid> {
    Arc::new(make_grid(256, 0.99, 1.0).unwrap())
}

/// Sine series with random coefficients plus nodal noise; vanishes at `R`.
fn random_function(grid: &Arc<RadialGrid>, rng: &mut ChaCha8Rng) -> DiscreteFunction {
    let modes: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let amp = 10f64.powf(rng.random_range(-1.0..1.0));
    let noise = rng.random_range(0.0..0.3);
    let mut u = DiscreteFunction::from_fn(grid.clone(), |r| {
        modes
            .iter()
            .enumerate()
            .map(|(k, c)| c * ((k as f64 + 0.5) * PI * r).cos())
            .sum::<f64>()
    });
    for v in u.coeffs_mut() {
        *v = amp * (*v + noise * rng.random_range(-1.0..1.0));
    }
    u
}

#[test]
fn criterion_01_hardy_inequality() {
    let start = Instant::now();
    let grid = default_grid();
    let ef = functional(2.0, 3, 0.1, 0.0, grid.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let u = random_function(&grid, &mut rng);
        let b = ef.energy(&u).unwrap();
        // ∫|u|²/|x|² <= 4 ∫|∇u|²
        worst = worst.min((4.0 * b.norm_w_p - b.norm_sing_p) / (4.0 * b.norm_w_p));
    }
    let elapsed = start.elapsed();
    let pass = worst >= -1e-8 && elapsed < Duration::from_secs(5);
    report(1, "hardy", pass, format!("worst relative slack {worst:e}, {elapsed:?}"));
    assert!(pass);
}

#[test]
fn criterion_02_chabrowski_inequality() {
    let start = Instant::now();
    let mut violations = 0;
    let mut p2_dev = 0.0_f64;
    for (i, p) in [2.0, 3.0, 4.0].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + i as u64);
        for _ in 0..100_000 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
            let c = chabrowski_check(&x, &y, p);
            // oracle for the right-hand side
            let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
            let rhs = 2.0 / (p * (2f64.powf(p - 1.0) - 1.0)) * d2.powf(0.5 * p);
            if (c.rhs - rhs).abs() > 1e-13 * (1.0 + rhs) || c.lhs < c.rhs - 1e-14 * (1.0 + c.rhs.abs()) {
                violations += 1;
            }
            if p == 2.0 {
                p2_dev = p2_dev.max((c.lhs - c.rhs).abs() / (1.0 + c.rhs.abs()));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = violations == 0 && p2_dev <= 1e-14 && elapsed < Duration::from_secs(2);
    report(2, "chabrowski", pass, format!("{violations} violations, p=2 deviation {p2_dev:e}, {elapsed:?}"));
    assert!(pass);
}

/// Richardson-extrapolated central difference of `t ↦ E(u + t v)` at 0,
/// over a ladder of steps, keeping the most self-consistent estimate.
fn fd_oracle(ef: &EnergyFunctional, u: &[f64], v: &[f64]) -> f64 {
    let scale = u.iter().map(|x| x.abs()).fold(0.0, f64::max) / v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let e = |t: f64| {
        let c: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + t * b).collect();
        ef.energy_coeffs(&c).unwrap().e
    };
    let central = |h: f64| (e(h) - e(-h)) / (2.0 * h);
    let mut best = (f64::INFINITY, 0.0);
    for k in 2..9 {
        let h = scale * 2f64.powi(-3 * k);
        let d1 = central(h);
        let d2 = central(0.5 * h);
        let rich = (4.0 * d2 - d1) / 3.0;
        let spread = (rich - d2).abs();
        if spread < best.0 {
            best = (spread, rich);
        }
    }
    best.1
}

#[test]
fn criterion_03_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0_f64;
    let grids = [Arc::new(make_grid(64, 0.99, 1.0).unwrap()), default_grid()];
    for k in 0..50 {
        let p = if k % 2 == 0 { 2.0 } else { 3.0 };
        let n = if p == 2.0 { 3 } else { 4 };
        let mu = if (k / 2) % 2 == 0 { 0.0 } else { 1.0 };
        let grid = &grids[k % 2];
        let params = EnergyParams::new(p, n, mu, 1.5, 0.5, 1.0).unwrap();
        let ex = ExampleParams::new(1.0, 1.0, 2.0, p, n).unwrap();
        let ef = EnergyFunctional::new(params, grid.clone(), example_f(&ex, p).unwrap(), example_g(&ex).unwrap()).unwrap();
        let u = random_function(grid, &mut rng);
        let v = random_function(grid, &mut rng);
        let analytic: f64 = ef
            .gradient(&u)
            .unwrap()
            .total
            .iter()
            .zip(v.coeffs())
            .map(|(a, b)| a * b)
            .sum();
        let fd = fd_oracle(&ef, u.coeffs(), v.coeffs());
        worst = worst.max((fd - analytic).abs() / analytic.abs());
    }
    let pass = worst <= 1e-6;
    report(3, "gradient", pass, format!("worst relative error {worst:e} over 50 cases"));
    assert!(pass);
}

#[test]
fn criterion_04_uniform_monotonicity_and_inverse() {
    let grid = Arc::new(make_grid(128, 0.99, 1.0).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_gap = f64::INFINITY;
    let mut worst_inverse = 0.0_f64;
    let cfg = SolveConfig::default();
    for (p, n) in [(2.0, 3), (3.0, 4)] {
        for mu in [0.0, 1.0] {
            let ef = functional(p, n, mu, 0.0, grid.clone());
            for _ in 0..50 {
                let u1 = random_function(&grid, &mut rng);
                let u2 = random_function(&grid, &mut rng);
                let m = monotonicity_gap(&u1, &u2, &ef).unwrap();
                // independent lower bound from the energy breakdown of u1 - u2
                let d = ef.energy(&(&u1 - &u2)).unwrap();
                let bound = chabrowski_constant(p) * (d.norm_w_p + mu * d.norm_sing_p);
                assert!((bound - m.lower_bound).abs() <= 1e-12 * bound);
                worst_gap = worst_gap.min((m.pairing - bound) / bound);
            }
            for _ in 0..5 {
                let mut u = random_function(&grid, &mut rng);
                let s = u.sup_norm();
                u = u.scaled(1.0 / s);
                let w = ef.gradient(&u).unwrap().phi;
                let v = invert_phi_prime(&w, &ef, &cfg).unwrap();
                worst_inverse = worst_inverse.max(ef.norm_star(&(&v - &u)));
            }
        }
    }
    let pass = worst_gap >= -1e-10 && worst_inverse <= 1e-5;
    report(
        4,
        "uniform monotonicity",
        pass,
        format!("worst relative gap {worst_gap:e}, worst inverse error {worst_inverse:e}"),
    );
    assert!(pass);
}

fn poisson_error(grid: Arc<RadialGrid>) -> f64 {
    let params = EnergyParams::new(2.0, 3, 0.0, 0.0, 0.0, 1.0).unwrap();
    let ex = ExampleParams::default();
    let ef = EnergyFunctional::new(params, grid.clone(), example_f(&ex, 2.0).unwrap(), example_g(&ex).unwrap()).unwrap();
    // load ⟨1, φ_i⟩ = ∫ φ_i dx
    let w = ef.mass_vector();
    let u = invert_phi_prime(&w, &ef, &SolveConfig::default()).unwrap();
    grid.nodes()
        .iter()
        .enumerate()
        .map(|(i, r)| (u.node_value(i) - (1.0 - r * r) / 6.0).abs())
        .fold(0.0, f64::max)
}

#[test]
fn criterion_05_poisson_oracle() {
    let e256 = poisson_error(Arc::new(make_grid(256, 1.0, 1.0).unwrap()));
    let e512 = poisson_error(Arc::new(make_grid(512, 1.0, 1.0).unwrap()));
    let e128 = poisson_error(Arc::new(make_grid(128, 1.0, 1.0).unwrap()));
    let pass = e256 <= 1e-6 && e128 / e256 >= 3.5 && e256 / e512 >= 3.5;
    report(
        5,
        "poisson",
        pass,
        format!("max nodal error {e256:e} at 256 elements, ratios {:.3} and {:.3}", e128 / e256, e256 / e512),
    );
    assert!(pass);
}

#[test]
fn criterion_06_example_nonlinearities() {
    let ex = ExampleParams::new(1.0, 1.0, 2.0, 2.0, 3).unwrap();
    let f = example_f(&ex, 2.0).unwrap();
    let g = example_g(&ex).unwrap();
    let checks = [
        check_f1(&f, 2.0).unwrap().passes,
        check_f2(&f, 2.0).unwrap().passes,
        check_f3(&f).unwrap().passes,
        check_g1(&g).unwrap().passes,
    ];
    let value = f.anti(0.5 * PI);
    let lower = 0.5 * (PI * 2f64.sqrt() / 4.0).powi(2);
    let pass = checks.iter().all(|c| *c) && (value - PI * PI / 8.0).abs() <= 1e-9 && value > lower;
    report(
        6,
        "example certification",
        pass,
        format!("f1/f2/f3/g1 {checks:?}, F(pi/2) = {value:.15}, bound {lower:.15}"),
    );
    assert!(pass);
}

#[test]
fn criterion_07_beta_positive_with_bump_witness() {
    let ef = functional(2.0, 3, 0.1, 0.0, default_grid());
    let beta = estimate_beta(&ef, &SolveConfig::default()).unwrap();
    let c = beta.bump.conditions();
    // the three conditions, re-derived from the nodal values
    let spec = beta.bump.spec;
    let nodes = ef.grid().nodes();
    let values: Vec<f64> = (0..nodes.len()).map(|i| beta.bump.function.node_value(i)).collect();
    let last = values.iter().rposition(|v| *v != 0.0).unwrap();
    let support = nodes[last + 1] < spec.r_out;
    let rho = spec.r_in + spec.delta * (spec.r_out - spec.r_in);
    let first_out = nodes.iter().position(|r| *r >= rho).unwrap();
    let plateau = values[..=first_out].iter().all(|v| *v == spec.s0);
    let sup = values.iter().all(|v| v.abs() <= spec.s0.abs());
    let bump_ratio = ef.j1_value(beta.bump.function.coeffs()).unwrap() / ef.phi_value(beta.bump.function.coeffs());
    let pass = beta.beta_hat > 0.0 && bump_ratio > 0.0 && c.all() && support && plateau && sup;
    report(
        7,
        "beta positivity",
        pass,
        format!("beta_hat {:e}, bump ratio {bump_ratio:e}, spec {spec:?}", beta.beta_hat),
    );
    assert!(pass);
}

#[test]
fn criterion_08_three_critical_points() {
    let start = Instant::now();
    let ef = functional(2.0, 3, 0.1, 0.0, default_grid());
    let cfg = SolveConfig::default();
    let beta = estimate_beta(&ef, &cfg).unwrap().beta_hat;
    let lambdas: Vec<f64> = (0..8).map(|k| (0.5 + 3.5 * k as f64 / 7.0) / beta).collect();
    let table = sweep(&lambdas, &[0.0], &ef, &cfg).unwrap();
    let mut witnesses = Vec::new();
    for row in table.rows.iter().filter(|r| r.distinct >= 3 && r.nontrivial >= 2) {
        let rep = find_critical_points(&ef.with_lambda_gamma(row.lambda, 0.0).unwrap(), &cfg).unwrap();
        let residual_ok = rep.representatives().all(|s| {
            ef.with_lambda_gamma(row.lambda, 0.0).unwrap().gradient(&s.function).unwrap().l2_norm() <= 1e-8
        });
        let bounded = rep.representatives().all(|s| s.norm_star <= table.uniform_bound);
        if residual_ok && bounded && rep.distinct == row.distinct {
            witnesses.push(row.lambda * beta);
        }
    }
    let elapsed = start.elapsed();
    let pass = !witnesses.is_empty() && elapsed < Duration::from_secs(300);
    report(
        8,
        "multiplicity",
        pass,
        format!(
            "cells with >= 3 points at lambda*beta_hat = {witnesses:.3?}, uniform bound {:.6}, {elapsed:?}",
            table.uniform_bound
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_norm_and_metric_axioms() {
    let grid = default_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst_triangle = f64::INFINITY;
    let mut worst_metric = f64::INFINITY;
    let mut worst_homogeneity = 0.0_f64;
    for k in 0..1000 {
        let (p, n, mu) = [(2.0, 3, 0.1), (3.0, 4, 1.0), (4.0, 5, 0.5)][k % 3];
        let ef = functional(p, n, mu, 0.0, grid.clone());
        let u = random_function(&grid, &mut rng);
        let v = random_function(&grid, &mut rng);
        let w = random_function(&grid, &mut rng);
        // ‖x‖_* from the energy breakdown, d from its two parts
        let norm = |x: &DiscreteFunction| {
            let b = ef.energy(x).unwrap();
            (b.norm_w_p + mu * b.norm_sing_p).powf(1.0 / p)
        };
        let metric = |a: &DiscreteFunction, b: &DiscreteFunction| {
            let e = ef.energy(&(a - b)).unwrap();
            let d1 = e.norm_w_p.powf(1.0 / p);
            let d2 = (mu * e.norm_sing_p).powf(1.0 / p);
            (d1.powf(p) + d2.powf(p)).powf(1.0 / p)
        };
        let (a, b, s) = (norm(&u), norm(&v), norm(&(&u + &v)));
        worst_triangle = worst_triangle.min((a + b - s) / (a + b).max(1.0));
        let (l, r) = (metric(&u, &w), metric(&u, &v) + metric(&v, &w));
        worst_metric = worst_metric.min((r - l) / r.max(1.0));
        let alpha = rng.random_range(-5.0..5.0);
        let lib = ef.norm_star(&u.scaled(alpha));
        worst_homogeneity = worst_homogeneity.max((lib - alpha.abs() * ef.norm_star(&u)).abs() / lib.max(1.0));
    }
    let pass = worst_triangle >= -1e-12 && worst_metric >= -1e-12 && worst_homogeneity <= 1e-12;
    report(
        9,
        "norm and metric axioms",
        pass,
        format!("triangle {worst_triangle:e}, metric {worst_metric:e}, homogeneity {worst_homogeneity:e}"),
    );
    assert!(pass);
}

fn run_cli(args: &[&str], out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_hardy-plap"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--seed")
        .arg("7")
        .output()
        .expect("binary runs")
        .status
        .code()
        .unwrap_or(-1)
}

#[test]
fn criterion_10_deterministic_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let mut codes = Vec::new();
    for out in [&a, &b] {
        codes.push(run_cli(&["verify"], out));
        codes.push(run_cli(&["sweep", "--lambdas", "beta:1:3:3", "--gammas", "0,0.01"], out));
    }
    let same = |name: &str| std::fs::read(a.join(name)).unwrap() == std::fs::read(b.join(name)).unwrap();
    let pass = codes.iter().all(|c| *c == 0) && same("verify.csv") && same("sweep.csv");
    report(10, "determinism", pass, format!("exit codes {codes:?}"));
    assert!(pass);
}
