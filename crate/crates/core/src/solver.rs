//! Inversion of `Φ'`, multi-start critical point search for `E`, estimation
//! of `β = sup J1/Φ` and `(λ, γ)` sweeps.

use std::sync::Arc;

use rayon::prelude::*;

use crate::analysis::{build_bump, Bump, BumpSpec};
use crate::error::{Error, Result};
use crate::functionals::{EnergyBreakdown, EnergyFunctional, DEFAULT_EPS_REG};
use crate::linalg::{dot, norm2};
use crate::nonlinear::{check_f1, check_f2, check_f3, check_g1, Nonlinearity};
use crate::optim;
use crate::rng::{random_smooth, SampleStream};
use crate::types::{DiscreteFunction, RadialGrid};

/// Where the starting points of the search come from.
#[derive(Debug, Clone, PartialEq)]
pub struct StartFamily {
    pub zero: bool,
    /// Bump plateau values, as multiples of the maximizer of `F(s)/|s|^p`.
    pub bump_amplitudes: Vec<f64>,
    /// `(r_in, δ)` pairs as fractions of `R_omega`; the outer radius is `0.9 R_omega`.
    pub bump_shapes: Vec<(f64, f64)>,
    pub random: usize,
    /// Sup-norm range of the random smooth starts.
    pub random_amplitude: (f64, f64),
}

impl Default for StartFamily {
    fn default() -> Self {
        Self {
            zero: true,
            bump_amplitudes: vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
            bump_shapes: vec![(0.2, 0.5), (0.4, 0.2)],
            random: 4,
            random_amplitude: (0.5, 8.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    /// Stopping tolerance on the `ℓ²` norm of the nodal residual.
    pub tol: f64,
    pub max_descent_iter: usize,
    pub max_newton_iter: usize,
    pub eps_reg: f64,
    pub backtracking: f64,
    pub armijo: f64,
    /// Run the growth/limit checks on `f` and `g` before solving.
    pub enforce_conditions: bool,
    /// Clustering threshold factor: `dist_tol = dist_factor · max(1, ‖u‖_*)`.
    pub dist_factor: f64,
    pub starts: StartFamily,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_descent_iter: 500,
            max_newton_iter: 50,
            eps_reg: DEFAULT_EPS_REG,
            backtracking: 0.5,
            armijo: 1e-4,
            enforce_conditions: true,
            dist_factor: 1e-3,
            starts: StartFamily::default(),
            seed: 0,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.tol > 0.0) {
            return bad(format!("tol must be > 0, got {}", self.tol));
        }
        if !(self.backtracking > 0.0 && self.backtracking < 1.0) {
            return bad(format!("backtracking factor must lie in (0, 1), got {}", self.backtracking));
        }
        if !(self.armijo > 0.0 && self.armijo <= 0.5) {
            return bad(format!("sufficient-decrease constant must lie in (0, 0.5], got {}", self.armijo));
        }
        if !(self.eps_reg >= 0.0) || !(self.dist_factor > 0.0) {
            return bad("eps_reg must be >= 0 and dist_factor > 0".into());
        }
        if self.max_newton_iter == 0 {
            return bad("max_newton_iter must be positive".into());
        }
        Ok(())
    }
}

/// Solves `Φ'(u) = w` by damped Newton on the convex functional `Φ(u) - ⟨w, u⟩`.
///
/// Converged when `‖Φ'(u) - w‖ <= tol` in `ℓ²`, or when no step reduces a
/// residual already at the rounding floor `1e-12 · max(1, ‖w‖)`.
pub fn invert_phi_prime(w: &[f64], functional: &EnergyFunctional, config: &SolveConfig) -> Result<DiscreteFunction> {
    config.validate()?;
    if w.len() != functional.dofs() || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("load must be finite with one entry per free node".into()));
    }
    let p = functional.params().p;
    let target = config.tol;
    let floor = 1e-12 * norm2(w).max(1.0);
    let residual = |c: &[f64]| -> Vec<f64> {
        functional.phi_gradient(c).iter().zip(w).map(|(a, b)| a - b).collect()
    };
    let merit = |c: &[f64]| functional.phi_value(c) - dot(w, c);

    // start from the rescaled solution of the p = 2 problem
    let mut c = functional.phi_hessian(&vec![0.0; w.len()], 1.0).solve(w)?;
    let pairing = dot(&functional.phi_gradient(&c), &c);
    let rhs = dot(w, &c);
    if pairing > 0.0 && rhs > 0.0 {
        let t = (rhs / pairing).powf(1.0 / (p - 1.0));
        c.iter_mut().for_each(|v| *v *= t);
    } else {
        c.iter_mut().for_each(|v| *v = 0.0);
    }

    let mut r = residual(&c);
    let mut iterations = 0;
    let max_iter = config.max_descent_iter + config.max_newton_iter;
    while norm2(&r) > target {
        if iterations >= max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual: norm2(&r),
            });
        }
        iterations += 1;
        let k = functional.phi_hessian(&c, config.eps_reg.max(f64::MIN_POSITIVE));
        let d: Vec<f64> = k.solve(&r)?.into_iter().map(|v| -v).collect();
        let slope = dot(&r, &d);
        let m0 = merit(&c);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let mt = merit(&trial);
            if mt <= m0 + config.armijo * t * slope {
                let rt = residual(&trial);
                c = trial;
                r = rt;
                accepted = true;
                break;
            }
            // below rounding of the merit, fall back to the residual norm
            if (mt - m0).abs() <= 1e-15 * m0.abs().max(1e-300) {
                let rt = residual(&trial);
                if norm2(&rt) < norm2(&r) {
                    c = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            t *= config.backtracking;
        }
        if !accepted {
            if norm2(&r) <= floor {
                break;
            }
            return Err(Error::NonConvergence {
                iterations,
                residual: norm2(&r),
            });
        }
    }
    functional.function(c)
}

/// One converged critical point.
#[derive(Debug, Clone)]
pub struct Solution {
    pub function: DiscreteFunction,
    pub energy: EnergyBreakdown,
    pub norm_star: f64,
    /// `ℓ²` norm of `E'(u)`, recomputed after the solve.
    pub residual: f64,
    pub iterations: usize,
    pub start_id: usize,
    pub start: String,
}

/// Solutions within `dist_tol` of each other (single linkage).
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Index into [`SolveReport::solutions`] of the member with the smallest residual.
    pub representative: usize,
    pub members: Vec<usize>,
    pub norm_star: f64,
    pub energy: f64,
    pub trivial: bool,
}

#[derive(Debug, Clone)]
pub struct StartFailure {
    pub start_id: usize,
    pub start: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub lambda: f64,
    pub gamma: f64,
    pub solutions: Vec<Solution>,
    pub clusters: Vec<Cluster>,
    pub failures: Vec<StartFailure>,
    pub distinct: usize,
    pub nontrivial: usize,
    /// Largest `‖u‖_*` over the cluster representatives.
    pub max_norm: f64,
    pub beta_hat: Option<f64>,
}

impl SolveReport {
    pub fn representatives(&self) -> impl Iterator<Item = &Solution> {
        self.clusters.iter().map(|c| &self.solutions[c.representative])
    }
}

struct Start {
    label: String,
    coeffs: Vec<f64>,
    /// Skip the descent phase (saddle candidates).
    newton_only: bool,
}

/// Maximizer of `F(s)/|s|^p` over `s > 0` (log scan plus golden section).
pub fn ratio_maximizer(f: &Nonlinearity, p: f64) -> f64 {
    let phi = |s: f64| f.anti(s) / s.powf(p);
    let (lo, hi, n) = (-4.0_f64, 6.0_f64, 2001);
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..n {
        let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let v = phi(10f64.powf(x));
        if v > best.1 {
            best = (x, v);
        }
    }
    let step = (hi - lo) / (n - 1) as f64;
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if phi(10f64.powf(c)) > phi(10f64.powf(d)) {
            b = d;
        } else {
            a = c;
        }
    }
    10f64.powf(0.5 * (a + b))
}

fn bump_spec(grid: &RadialGrid, s0: f64, shape: (f64, f64)) -> BumpSpec {
    let r = grid.r_omega();
    BumpSpec::new(s0, shape.0 * r, 0.9 * r, shape.1)
}

fn minimization_starts(functional: &EnergyFunctional, config: &SolveConfig) -> Vec<Start> {
    let grid = functional.grid();
    let fam = &config.starts;
    let mut starts = Vec::new();
    if fam.zero {
        starts.push(Start {
            label: "zero".into(),
            coeffs: vec![0.0; functional.dofs()],
            newton_only: false,
        });
    }
    let s_star = ratio_maximizer(functional.f(), functional.params().p);
    for &shape in &fam.bump_shapes {
        for &a in &fam.bump_amplitudes {
            if let Ok(b) = build_bump(bump_spec(grid, a * s_star, shape), grid) {
                starts.push(Start {
                    label: format!("bump(s0={:.4},r={},delta={})", a * s_star, shape.0, shape.1),
                    coeffs: b.function.into_coeffs(),
                    newton_only: false,
                });
            }
        }
    }
    let stream = SampleStream::new(config.seed).fork(0x5717);
    for k in 0..fam.random {
        let mut rng = stream.rng(k as u64);
        let mut u = random_smooth(grid, &mut rng, 1.0);
        let sup = u.sup_norm().max(f64::MIN_POSITIVE);
        let (lo, hi) = fam.random_amplitude;
        let amp = lo * (hi / lo).powf((k as f64 + 0.5) / fam.random as f64);
        u = u.scaled(amp / sup);
        starts.push(Start {
            label: format!("random({k})"),
            coeffs: u.into_coeffs(),
            newton_only: false,
        });
    }
    starts
}

/// First interior local maximum of `t ↦ E(t w)` on `(0, t_max]`, if any.
fn ray_maximum(functional: &EnergyFunctional, w: &[f64], t_max: f64) -> Option<f64> {
    let n = 400;
    let e = |t: f64| {
        let c: Vec<f64> = w.iter().map(|v| t * v).collect();
        functional.energy_value(&c).unwrap_or(f64::NAN)
    };
    let values: Vec<f64> = (0..=n).map(|i| e(t_max * i as f64 / n as f64)).collect();
    let i = (1..n).find(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])?;
    let (mut a, mut b) = (t_max * (i - 1) as f64 / n as f64, t_max * (i + 1) as f64 / n as f64);
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if e(c) > e(d) {
            b = d;
        } else {
            a = c;
        }
    }
    Some(0.5 * (a + b))
}

fn saddle_starts(functional: &EnergyFunctional, config: &SolveConfig, minima: &[Vec<f64>]) -> Vec<Start> {
    let mut starts = Vec::new();
    // ray maxima towards each minimizer, and midpoints of minimizer pairs
    for (i, m) in minima.iter().enumerate() {
        if norm2(m) > 0.0 {
            if let Some(t) = ray_maximum(functional, m, 1.0) {
                starts.push(Start {
                    label: format!("ray-max(min {i})"),
                    coeffs: m.iter().map(|v| t * v).collect(),
                    newton_only: true,
                });
            }
        }
        for (j, other) in minima.iter().enumerate().skip(i + 1) {
            starts.push(Start {
                label: format!("midpoint(min {i}, min {j})"),
                coeffs: m.iter().zip(other).map(|(a, b)| 0.5 * (a + b)).collect(),
                newton_only: true,
            });
        }
    }
    // ray maxima along the bump shapes, and the raw bumps, Newton only
    let grid = functional.grid();
    let s_star = ratio_maximizer(functional.f(), functional.params().p);
    for &shape in &config.starts.bump_shapes {
        if let Ok(b) = build_bump(bump_spec(grid, s_star, shape), grid) {
            let w = b.function.coeffs();
            let top = config.starts.bump_amplitudes.iter().fold(1.0_f64, |m, a| m.max(*a));
            if let Some(t) = ray_maximum(functional, w, top) {
                starts.push(Start {
                    label: format!("bump-ray-max(r={},delta={})", shape.0, shape.1),
                    coeffs: w.iter().map(|v| t * v).collect(),
                    newton_only: true,
                });
            }
            for &a in &config.starts.bump_amplitudes {
                starts.push(Start {
                    label: format!("bump-newton(s0={:.4},r={},delta={})", a * s_star, shape.0, shape.1),
                    coeffs: w.iter().map(|v| a * v).collect(),
                    newton_only: true,
                });
            }
        }
    }
    starts
}

/// Preconditioned descent on `E` until `‖E'‖ <= 10 tol`, the iteration limit,
/// or a failed line search.
fn descend(functional: &EnergyFunctional, mut c: Vec<f64>, config: &SolveConfig) -> Result<(Vec<f64>, usize)> {
    let mut e = functional.energy_value(&c)?;
    let mut r = functional.residual(&c)?;
    let mut step = 1.0;
    let mut it = 0;
    while it < config.max_descent_iter && norm2(&r) > 10.0 * config.tol {
        it += 1;
        let k = functional.phi_hessian(&c, config.eps_reg.max(1e-12));
        let mut d: Vec<f64> = match k.solve(&r) {
            Ok(x) => x.into_iter().map(|v| -v).collect(),
            Err(_) => r.iter().map(|v| -v).collect(),
        };
        let mut slope = dot(&r, &d);
        if !(slope < 0.0) {
            d = r.iter().map(|v| -v).collect();
            slope = -dot(&r, &r);
        }
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            if let Ok(et) = functional.energy_value(&trial) {
                if et <= e + config.armijo * t * slope {
                    accepted = Some((trial, et));
                    break;
                }
            }
            t *= config.backtracking;
        }
        let Some((trial, et)) = accepted else {
            break;
        };
        c = trial;
        e = et;
        r = functional.residual(&c)?;
        step = (t / config.backtracking).min(1.0);
    }
    Ok((c, it))
}

/// Regularized Newton on `E'(u) = 0` with a line search on `‖E'‖`.
fn newton(functional: &EnergyFunctional, mut c: Vec<f64>, config: &SolveConfig) -> Result<(Vec<f64>, usize)> {
    let mut r = functional.residual(&c)?;
    let mut rn = norm2(&r);
    let mut it = 0;
    while rn > config.tol {
        if it >= config.max_newton_iter {
            return Err(Error::NonConvergence { iterations: it, residual: rn });
        }
        it += 1;
        let k = functional.newton_matrix_coeffs(&c, config.eps_reg.max(1e-300))?;
        let d: Vec<f64> = k.solve(&r)?.into_iter().map(|v| -v).collect();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            if let Ok(rt) = functional.residual(&trial) {
                let n = norm2(&rt);
                if n <= (1.0 - config.armijo * t) * rn {
                    accepted = Some((trial, rt, n));
                    break;
                }
            }
            t *= config.backtracking;
        }
        let Some((trial, rt, n)) = accepted else {
            return Err(Error::NonConvergence { iterations: it, residual: rn });
        };
        c = trial;
        r = rt;
        rn = n;
    }
    Ok((c, it))
}

fn run_start(functional: &EnergyFunctional, start: &Start, config: &SolveConfig) -> Result<(Vec<f64>, usize)> {
    let (c, it_d) = if start.newton_only {
        (start.coeffs.clone(), 0)
    } else {
        descend(functional, start.coeffs.clone(), config)?
    };
    let (c, it_n) = newton(functional, c, config)?;
    Ok((c, it_d + it_n))
}

/// Single-linkage clustering with `d(a, b) <= dist_factor · max(1, ‖a‖_*, ‖b‖_*)`.
fn cluster(functional: &EnergyFunctional, solutions: &[Solution], dist_factor: f64) -> Vec<Cluster> {
    let n = solutions.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let tol = dist_factor * solutions[i].norm_star.max(solutions[j].norm_star).max(1.0);
            let d = functional.norm_star(&(&solutions[i].function - &solutions[j].function));
            if d <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_of[r] {
            Some(g) => groups[g].push(i),
            None => {
                root_of[r] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }
    let mut clusters: Vec<Cluster> = groups
        .into_iter()
        .map(|members| {
            let representative = *members
                .iter()
                .min_by(|a, b| solutions[**a].residual.total_cmp(&solutions[**b].residual))
                .expect("non-empty group");
            let s = &solutions[representative];
            Cluster {
                representative,
                members,
                norm_star: s.norm_star,
                energy: s.energy.e,
                trivial: s.norm_star <= 10.0 * dist_factor,
            }
        })
        .collect();
    clusters.sort_by(|a, b| a.norm_star.total_cmp(&b.norm_star));
    clusters
}

/// Checks `(f1)`, `(f2)`, `(f3)` on `f` and `(g1)` on `g`.
pub fn check_conditions(functional: &EnergyFunctional) -> Result<()> {
    let p = functional.params().p;
    let f = functional.f();
    let failed: Vec<&str> = [
        ("f1", check_f1(f, p)?.passes),
        ("f2", check_f2(f, p)?.passes),
        ("f3", check_f3(f)?.passes),
        ("g1", check_g1(functional.g())?.passes),
    ]
    .into_iter()
    .filter(|(_, ok)| !ok)
    .map(|(n, _)| n)
    .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "nonlinearity conditions failed: {}",
            failed.join(", ")
        )))
    }
}

fn collect(
    functional: &EnergyFunctional,
    starts: &[Start],
    offset: usize,
    config: &SolveConfig,
    solutions: &mut Vec<Solution>,
    failures: &mut Vec<StartFailure>,
) {
    let outcomes: Vec<Result<(Vec<f64>, usize)>> = starts.par_iter().map(|s| run_start(functional, s, config)).collect();
    for (k, (start, outcome)) in starts.iter().zip(outcomes).enumerate() {
        let start_id = offset + k;
        let verified = outcome.and_then(|(c, iterations)| {
            // independent re-check of the residual
            let residual = norm2(&functional.residual(&c)?);
            if residual > config.tol {
                return Err(Error::NonConvergence { iterations, residual });
            }
            let energy = functional.energy_coeffs(&c)?;
            let norm_star = functional.norm_star_coeffs(&c);
            Ok(Solution {
                function: functional.function(c)?,
                energy,
                norm_star,
                residual,
                iterations,
                start_id,
                start: start.label.clone(),
            })
        });
        match verified {
            Ok(s) => solutions.push(s),
            Err(e) => failures.push(StartFailure {
                start_id,
                start: start.label.clone(),
                error: e.to_string(),
            }),
        }
    }
}

/// Multi-start search for critical points of `E`.
///
/// Minimization starts run preconditioned descent followed by Newton; saddle
/// candidates (ray maxima, midpoints of distinct minimizers, scaled bumps) run
/// Newton alone. Converged points are re-verified and clustered.
pub fn find_critical_points(functional: &EnergyFunctional, config: &SolveConfig) -> Result<SolveReport> {
    config.validate()?;
    if config.enforce_conditions {
        check_conditions(functional)?;
    }
    let mut solutions = Vec::new();
    let mut failures = Vec::new();
    let first = minimization_starts(functional, config);
    collect(functional, &first, 0, config, &mut solutions, &mut failures);

    let minima_clusters = cluster(functional, &solutions, config.dist_factor);
    let minima: Vec<Vec<f64>> = minima_clusters
        .iter()
        .map(|c| solutions[c.representative].function.coeffs().to_vec())
        .collect();
    let second = saddle_starts(functional, config, &minima);
    collect(functional, &second, first.len(), config, &mut solutions, &mut failures);

    let clusters = cluster(functional, &solutions, config.dist_factor);
    let nontrivial = clusters.iter().filter(|c| !c.trivial).count();
    let max_norm = clusters.iter().fold(0.0_f64, |m, c| m.max(c.norm_star));
    Ok(SolveReport {
        lambda: functional.params().lambda,
        gamma: functional.params().gamma,
        distinct: clusters.len(),
        nontrivial,
        max_norm,
        solutions,
        clusters,
        failures,
        beta_hat: None,
    })
}

/// Result of maximizing `J1/Φ`.
#[derive(Debug, Clone)]
pub struct BetaEstimate {
    pub beta_hat: f64,
    /// Best ratio over the bump grid alone.
    pub bump_ratio: f64,
    pub bump: Bump,
    /// The ascended maximizer, `J1(witness)/Φ(witness) = beta_hat`.
    pub witness: DiscreteFunction,
}

impl BetaEstimate {
    /// `1/β̂`: `λ` must exceed it for a nontrivial global minimizer.
    pub fn lambda_threshold(&self) -> f64 {
        1.0 / self.beta_hat
    }
}

fn ratio_value(functional: &EnergyFunctional, c: &[f64]) -> Result<f64> {
    let phi = functional.phi_value(c);
    if !(phi > 0.0) {
        return Err(Error::InvalidArgument("Φ vanishes".into()));
    }
    Ok(functional.j1_value(c)? / phi)
}

/// Local ascent of `J1/Φ` preconditioned by the second variation of `Φ`.
pub fn ascend_ratio(functional: &EnergyFunctional, start: Vec<f64>, config: &SolveConfig) -> Result<(Vec<f64>, f64)> {
    let eps = config.eps_reg.max(1e-12);
    let out = optim::preconditioned_ascent(
        start,
        |c| {
            let phi = functional.phi_value(c);
            if !(phi > 0.0) {
                return Err(Error::InvalidArgument("Φ vanishes".into()));
            }
            let j = functional.j1_value(c)?;
            let q = j / phi;
            let gj = functional.j1_gradient(c)?;
            let gp = functional.phi_gradient(c);
            Ok((q, gj.iter().zip(&gp).map(|(a, b)| (a - q * b) / phi).collect()))
        },
        |c, g| {
            let phi = functional.phi_value(c);
            Ok(functional.phi_hessian(c, eps).solve(g)?.into_iter().map(|v| v * phi).collect())
        },
        config.max_descent_iter,
        1e-14,
    )?;
    Ok((out.x, out.value))
}

/// Bump grid: `s0` in `{0.5, 0.75, 1, 1.5, 2}` times the maximizer of
/// `F(s)/|s|^p`, five inner radii and five `δ`, outer radius `0.9 R_omega`.
pub fn bump_grid(functional: &EnergyFunctional) -> Vec<BumpSpec> {
    let s_star = ratio_maximizer(functional.f(), functional.params().p);
    let r = functional.grid().r_omega();
    let mut specs = Vec::with_capacity(125);
    for s in [0.5, 0.75, 1.0, 1.5, 2.0] {
        for r_in in [0.1, 0.25, 0.4, 0.55, 0.7] {
            for delta in [0.1, 0.3, 0.5, 0.7, 0.9] {
                specs.push(BumpSpec::new(s * s_star, r_in * r, 0.9 * r, delta));
            }
        }
    }
    specs
}

/// Estimates `β = sup_{Φ > 0} J1/Φ`: best bump, then local ascent.
pub fn estimate_beta(functional: &EnergyFunctional, config: &SolveConfig) -> Result<BetaEstimate> {
    config.validate()?;
    let grid = functional.grid();
    let mut best: Option<(Bump, f64)> = None;
    for spec in bump_grid(functional) {
        let Ok(bump) = build_bump(spec, grid) else {
            continue;
        };
        let Ok(q) = ratio_value(functional, bump.function.coeffs()) else {
            continue;
        };
        if q > 0.0 && best.as_ref().is_none_or(|b| q > b.1) {
            best = Some((bump, q));
        }
    }
    let Some((bump, bump_ratio)) = best else {
        return Err(Error::NoPositiveRatio);
    };
    let (c, value) = ascend_ratio(functional, bump.function.coeffs().to_vec(), config)?;
    let (witness, beta_hat) = if value > bump_ratio {
        (functional.function(c)?, value)
    } else {
        (bump.function.clone(), bump_ratio)
    };
    Ok(BetaEstimate {
        beta_hat,
        bump_ratio,
        bump,
        witness,
    })
}

/// One cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub gamma: f64,
    pub distinct: usize,
    pub nontrivial: usize,
    pub max_norm: f64,
    /// Smallest residual among converged points (`NaN` when none converged).
    pub min_residual: f64,
    pub converged: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Largest `‖u‖_*` over all cells: every reported solution lies below it.
    pub uniform_bound: f64,
}

/// Runs [`find_critical_points`] on every `(λ, γ)` cell; rows in `λ`-major order.
pub fn sweep(lambdas: &[f64], gammas: &[f64], functional: &EnergyFunctional, config: &SolveConfig) -> Result<SweepTable> {
    config.validate()?;
    if lambdas.is_empty() || gammas.is_empty() {
        return Err(Error::InvalidArgument("sweep grids must be non-empty".into()));
    }
    if lambdas.iter().chain(gammas).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("sweep grids must be finite and nonnegative".into()));
    }
    if config.enforce_conditions {
        check_conditions(functional)?;
    }
    let cells: Vec<(f64, f64)> = lambdas.iter().flat_map(|&l| gammas.iter().map(move |&g| (l, g))).collect();
    let cell_config = SolveConfig {
        enforce_conditions: false,
        ..config.clone()
    };
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(lambda, gamma)| {
            let outcome = functional
                .with_lambda_gamma(lambda, gamma)
                .and_then(|f| find_critical_points(&f, &cell_config));
            match outcome {
                Ok(rep) => SweepRow {
                    lambda,
                    gamma,
                    distinct: rep.distinct,
                    nontrivial: rep.nontrivial,
                    max_norm: rep.max_norm,
                    min_residual: rep.solutions.iter().map(|s| s.residual).fold(f64::NAN, f64::min),
                    converged: rep.solutions.len(),
                    error: None,
                },
                Err(e) => SweepRow {
                    lambda,
                    gamma,
                    distinct: 0,
                    nontrivial: 0,
                    max_norm: f64::NAN,
                    min_residual: f64::NAN,
                    converged: 0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let uniform_bound = rows.iter().filter(|r| r.max_norm.is_finite()).fold(0.0_f64, |m, r| m.max(r.max_norm));
    Ok(SweepTable { rows, uniform_bound })
}

/// Shared handle used by callers that build several functionals on one grid.
pub fn shared_grid(grid: RadialGrid) -> Arc<RadialGrid> {
    Arc::new(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinear::{example_f, example_g, zero, ExampleParams, Kind};
    use crate::types::{make_grid, EnergyParams};

    fn functional(lambda: f64, gamma: f64, elements: usize) -> EnergyFunctional {
        let params = EnergyParams::new(2.0, 3, 0.1, lambda, gamma, 1.0).unwrap();
        let grid = Arc::new(make_grid(elements, 0.99, 1.0).unwrap());
        let ex = ExampleParams::default();
        EnergyFunctional::new(params, grid, example_f(&ex, 2.0).unwrap(), example_g(&ex).unwrap()).unwrap()
    }

    #[test]
    fn inverse_of_zero_is_zero() {
        let ef = functional(0.0, 0.0, 32);
        let u = invert_phi_prime(&vec![0.0; ef.dofs()], &ef, &SolveConfig::default()).unwrap();
        assert!(u.is_zero());
    }

    #[test]
    fn linear_problem_has_only_zero() {
        let ef = functional(0.0, 0.0, 64);
        let rep = find_critical_points(&ef, &SolveConfig::default()).unwrap();
        assert_eq!(rep.distinct, 1);
        assert!(rep.clusters[0].trivial);
    }

    #[test]
    fn disturbance_removes_zero() {
        let ef = functional(1.0, 0.5, 64);
        let rep = find_critical_points(&ef, &SolveConfig::default()).unwrap();
        assert!(rep.solutions.iter().all(|s| !s.function.is_zero()));
        assert!(rep.clusters.iter().all(|c| !c.trivial));
    }

    #[test]
    fn zero_forcing_has_no_beta() {
        let params = EnergyParams::unit_ball(2.0, 3, 0.1).unwrap();
        let grid = Arc::new(make_grid(32, 0.99, 1.0).unwrap());
        let ef = EnergyFunctional::new(params, grid, zero(Kind::Forcing), zero(Kind::Disturbance)).unwrap();
        assert!(matches!(estimate_beta(&ef, &SolveConfig::default()), Err(Error::NoPositiveRatio)));
    }

    #[test]
    fn config_validation() {
        let mut c = SolveConfig::default();
        assert!(c.validate().is_ok());
        c.backtracking = 1.0;
        assert!(c.validate().is_err());
        c = SolveConfig { armijo: 0.6, ..SolveConfig::default() };
        assert!(c.validate().is_err());
    }
}
