//! Randomized audits of the inequalities behind the variational argument,
//! the bump construction and the `J1/Φ` ratio probes.
//!
//! Every random audit draws sample `k` from stream `k` of a [`SampleStream`],
//! so results do not depend on the number of threads.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::EnergyFunctional;
use crate::linalg::dot;
use crate::nonlinear::{check_f1, check_f2, check_f3, check_g1, Nonlinearity};
use crate::rng::{random_rough, random_smooth, SampleStream};
use crate::types::{chabrowski_constant, hardy_constant, unit_ball_volume, DiscreteFunction, RadialGrid};

/// One row of the verification table.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRecord {
    pub name: String,
    pub samples: usize,
    /// Smallest normalized slack seen; negative beyond the tolerance means failure.
    pub worst_margin: f64,
    pub passes: bool,
    /// Description of the worst sample when the audit fails.
    pub witness: Option<String>,
    /// Whether the row decides the verification outcome (otherwise reported only).
    pub gating: bool,
}

impl AuditRecord {
    fn from_margins(name: impl Into<String>, margins: &[f64], tolerance: f64) -> Self {
        let (idx, worst) = margins
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, m)| if m < acc.1 || m.is_nan() { (i, m) } else { acc });
        let passes = !margins.is_empty() && margins.iter().all(|m| *m >= -tolerance);
        Self {
            name: name.into(),
            samples: margins.len(),
            worst_margin: worst,
            passes,
            witness: (!passes).then(|| format!("sample {idx}, margin {worst:e}")),
            gating: true,
        }
    }

    pub fn single(name: impl Into<String>, margin: f64, passes: bool) -> Self {
        Self {
            name: name.into(),
            samples: 1,
            worst_margin: margin,
            passes,
            witness: (!passes).then(|| format!("margin {margin:e}")),
            gating: true,
        }
    }
}

// stream tags of the individual audits
const TAG_HARDY: u64 = 1;
const TAG_POINCARE: u64 = 2;
const TAG_CHABROWSKI: u64 = 3;
const TAG_MONOTONE: u64 = 4;
const TAG_CONVEX: u64 = 5;
const TAG_METRIC: u64 = 6;
const TAG_RATIO: u64 = 7;
const TAG_GRADIENT: u64 = 8;

/// Random test function: smooth or rough, amplitude log-uniform in `[0.1, 10]`.
pub fn random_function(grid: &Arc<RadialGrid>, rng: &mut impl Rng) -> DiscreteFunction {
    let amplitude = 10f64.powf(rng.random_range(-1.0..=1.0));
    if rng.random_bool(0.5) {
        random_smooth(grid, rng, amplitude)
    } else {
        random_rough(grid, rng, amplitude)
    }
}

fn sample_functions(grid: &Arc<RadialGrid>, stream: SampleStream, index: u64, count: usize) -> Vec<DiscreteFunction> {
    let mut rng = stream.rng(index);
    (0..count).map(|_| random_function(grid, &mut rng)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChabrowskiCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub passes: bool,
}

/// `(|x|^{p-2}x - |y|^{p-2}y)·(x-y) >= a_1 |x-y|^p` for vectors `x`, `y`.
pub fn chabrowski_check(x: &[f64], y: &[f64], p: f64) -> ChabrowskiCheck {
    assert_eq!(x.len(), y.len(), "vectors of equal dimension");
    let nx = dot(x, x).sqrt();
    let ny = dot(y, y).sqrt();
    let sx = if nx > 0.0 { nx.powf(p - 2.0) } else { 0.0 };
    let sy = if ny > 0.0 { ny.powf(p - 2.0) } else { 0.0 };
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let lhs: f64 = x
        .iter()
        .zip(y)
        .zip(&diff)
        .map(|((a, b), d)| (sx * a - sy * b) * d)
        .sum();
    let rhs = chabrowski_constant(p) * dot(&diff, &diff).sqrt().powf(p);
    ChabrowskiCheck {
        lhs,
        rhs,
        passes: lhs >= rhs - 1e-14 * (1.0 + rhs.abs()),
    }
}

/// Random pairs in dimension `dim`, coordinates scaled by `10^U(-2, 2)`.
pub fn chabrowski_audit(p: f64, dim: usize, samples: usize, stream: SampleStream) -> AuditRecord {
    let stream = stream.fork(TAG_CHABROWSKI);
    let margins: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream.rng(k as u64);
            let sx = 10f64.powf(rng.random_range(-2.0..=2.0));
            let sy = 10f64.powf(rng.random_range(-2.0..=2.0));
            let x: Vec<f64> = (0..dim).map(|_| sx * rng.random_range(-1.0..=1.0)).collect();
            let y: Vec<f64> = (0..dim).map(|_| sy * rng.random_range(-1.0..=1.0)).collect();
            let c = chabrowski_check(&x, &y, p);
            (c.lhs - c.rhs) / (1.0 + c.rhs.abs())
        })
        .collect();
    AuditRecord::from_margins(format!("chabrowski_p{p}"), &margins, 1e-14)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityGap {
    pub pairing: f64,
    pub lower_bound: f64,
    pub passes: bool,
}

/// `⟨Φ'(u1) - Φ'(u2), u1 - u2⟩ >= a_1 (‖u1-u2‖_W^p + μ ‖u1-u2‖^p_sing)`.
pub fn monotonicity_gap(u1: &DiscreteFunction, u2: &DiscreteFunction, functional: &EnergyFunctional) -> Result<MonotonicityGap> {
    if !u1.same_grid(u2) {
        return Err(Error::InvalidArgument("functions live on different grids".into()));
    }
    let d: Vec<f64> = u1.coeffs().iter().zip(u2.coeffs()).map(|(a, b)| a - b).collect();
    let g1 = functional.phi_gradient(u1.coeffs());
    let g2 = functional.phi_gradient(u2.coeffs());
    let pairing: f64 = g1.iter().zip(&g2).zip(&d).map(|((a, b), x)| (a - b) * x).sum();
    let mu = functional.params().mu;
    let lower_bound = chabrowski_constant(functional.params().p)
        * (functional.norm_w_p(&d) + mu * functional.norm_sing_p(&d));
    Ok(MonotonicityGap {
        pairing,
        lower_bound,
        passes: pairing >= lower_bound - 1e-10 * lower_bound.abs(),
    })
}

pub fn monotonicity_audit(functional: &EnergyFunctional, samples: usize, stream: SampleStream) -> Result<AuditRecord> {
    let stream = stream.fork(TAG_MONOTONE);
    let grid = functional.grid();
    let margins = (0..samples)
        .into_par_iter()
        .map(|k| {
            let pair = sample_functions(grid, stream, k as u64, 2);
            let m = monotonicity_gap(&pair[0], &pair[1], functional)?;
            Ok((m.pairing - m.lower_bound) / m.lower_bound.abs().max(f64::MIN_POSITIVE))
        })
        .collect::<Result<Vec<f64>>>()?;
    let p = functional.params();
    Ok(AuditRecord::from_margins(
        format!("uniform_monotonicity_p{}_mu{}", p.p, p.mu),
        &margins,
        1e-10,
    ))
}

/// `∫ |u|^p/|x|^p dx <= C_{n,p} ∫ |∇u|^p dx` on random functions
/// (margins relative to the right-hand side).
pub fn hardy_audit(functional: &EnergyFunctional, samples: usize, stream: SampleStream) -> AuditRecord {
    let stream = stream.fork(TAG_HARDY);
    let p = functional.params();
    let c = hardy_constant(p.p, p.n);
    let margins: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let u = &sample_functions(functional.grid(), stream, k as u64, 1)[0];
            let rhs = c * functional.norm_w_p(u.coeffs());
            (rhs - functional.norm_sing_p(u.coeffs())) / rhs
        })
        .collect();
    AuditRecord::from_margins("hardy", &margins, 1e-8)
}

/// `‖u‖_{L^p} <= C_p ‖∇u‖_{L^p}` with the estimated constant.
pub fn poincare_audit(functional: &EnergyFunctional, poincare_c: f64, samples: usize, stream: SampleStream) -> AuditRecord {
    let stream = stream.fork(TAG_POINCARE);
    let cp = poincare_c.powf(functional.params().p);
    let margins: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let u = &sample_functions(functional.grid(), stream, k as u64, 1)[0];
            let rhs = cp * functional.norm_w_p(u.coeffs());
            (rhs - functional.norm_lp_p(u.coeffs())) / rhs
        })
        .collect();
    AuditRecord::from_margins("poincare", &margins, 1e-8)
}

/// `d(u, v) = (d_1^p + d_2^p)^{1/p}` with `d_1` the gradient distance and
/// `d_2 = μ^{1/p}` times the singular-weight distance.
pub fn combined_metric(u: &DiscreteFunction, v: &DiscreteFunction, functional: &EnergyFunctional) -> f64 {
    let p = functional.params().p;
    let d: Vec<f64> = u.coeffs().iter().zip(v.coeffs()).map(|(a, b)| a - b).collect();
    let d1 = functional.norm_w_p(&d).powf(1.0 / p);
    let d2 = functional.params().mu.powf(1.0 / p) * functional.norm_sing_p(&d).powf(1.0 / p);
    (d1.powf(p) + d2.powf(p)).powf(1.0 / p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub passes: bool,
}

/// Triangle inequality `d(u, w) <= d(u, v) + d(v, w)` for the combined metric.
pub fn metric_combination_check(
    u: &DiscreteFunction,
    v: &DiscreteFunction,
    w: &DiscreteFunction,
    functional: &EnergyFunctional,
) -> Result<MetricCheck> {
    if !u.same_grid(v) || !v.same_grid(w) {
        return Err(Error::InvalidArgument("functions live on different grids".into()));
    }
    let lhs = combined_metric(u, w, functional);
    let rhs = combined_metric(u, v, functional) + combined_metric(v, w, functional);
    Ok(MetricCheck {
        lhs,
        rhs,
        passes: lhs <= rhs + 1e-12 * rhs.max(1.0),
    })
}

/// Metric-combination triangle inequality, `‖·‖_*` triangle inequality and
/// homogeneity on random triples.
pub fn norm_axiom_audit(functional: &EnergyFunctional, samples: usize, stream: SampleStream) -> Vec<AuditRecord> {
    let stream = stream.fork(TAG_METRIC);
    let rows: Vec<[f64; 3]> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream.rng(k as u64);
            let t: Vec<DiscreteFunction> = (0..3).map(|_| random_function(functional.grid(), &mut rng)).collect();
            let m = metric_combination_check(&t[0], &t[1], &t[2], functional).expect("same grid");
            let metric = (m.rhs - m.lhs) / m.rhs.max(1.0);
            let sum = &t[0] + &t[1];
            let a = functional.norm_star(&t[0]);
            let b = functional.norm_star(&t[1]);
            let s = functional.norm_star(&sum);
            let triangle = (a + b - s) / (a + b).max(1.0);
            let alpha: f64 = rng.random_range(-10.0..=10.0);
            let scaled = functional.norm_star(&t[2].scaled(alpha));
            let expect = alpha.abs() * functional.norm_star(&t[2]);
            let homogeneity = -(scaled - expect).abs() / expect.max(1.0);
            [metric, triangle, homogeneity]
        })
        .collect();
    let col = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<_>>();
    vec![
        AuditRecord::from_margins("metric_combination", &col(0), 1e-12),
        AuditRecord::from_margins("norm_triangle", &col(1), 1e-12),
        AuditRecord::from_margins("norm_homogeneity", &col(2), 1e-12),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MidpointCheck {
    pub midpoint_norm: f64,
    /// `‖u - v‖_*` after normalization.
    pub distance: f64,
    pub gap: f64,
    pub passes: bool,
}

/// Normalizes `u`, `v` to `‖·‖_* = 1` and checks `‖(u+v)/2‖_* < 1 - 1e-12`
/// given `‖u - v‖_* >= eps`.
pub fn midpoint_convexity_check(
    u: &DiscreteFunction,
    v: &DiscreteFunction,
    functional: &EnergyFunctional,
    eps: f64,
) -> Result<MidpointCheck> {
    if !u.same_grid(v) {
        return Err(Error::InvalidArgument("functions live on different grids".into()));
    }
    let nu = functional.norm_star(u);
    let nv = functional.norm_star(v);
    if !(nu > 0.0 && nv > 0.0) {
        return Err(Error::InvalidArgument("cannot normalize the zero function".into()));
    }
    let un = u.scaled(1.0 / nu);
    let vn = v.scaled(1.0 / nv);
    let distance = functional.norm_star(&(&un - &vn));
    if distance == 0.0 {
        return Err(Error::InvalidArgument("u = v after normalization".into()));
    }
    if distance < eps {
        return Err(Error::InvalidArgument(format!(
            "normalized distance {distance} below eps = {eps}"
        )));
    }
    let midpoint_norm = functional.norm_star(&(&un + &vn).scaled(0.5));
    Ok(MidpointCheck {
        midpoint_norm,
        distance,
        gap: 1.0 - midpoint_norm,
        passes: midpoint_norm < 1.0 - 1e-12,
    })
}

/// Midpoint audit for one `eps`. Pairs closer than `eps` are redrawn. At
/// `p = 2` the gap is also compared with the parallelogram law.
pub fn convexity_audit(functional: &EnergyFunctional, eps: f64, samples: usize, stream: SampleStream) -> Result<AuditRecord> {
    let stream = stream.fork(TAG_CONVEX ^ eps.to_bits());
    let hilbert = functional.params().p == 2.0;
    let margins = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream.rng(k as u64);
            for _ in 0..1000 {
                let u = random_function(functional.grid(), &mut rng);
                // mix u into v so that small distances also occur
                let t = 10f64.powf(rng.random_range(-2.0..=2.0));
                let w = random_function(functional.grid(), &mut rng);
                let nu = functional.norm_star(&u);
                let nw = functional.norm_star(&w);
                let v = &u.scaled(1.0 / nu) + &w.scaled(t / nw);
                match midpoint_convexity_check(&u, &v, functional, eps) {
                    Ok(m) => {
                        let mut margin = m.gap - 1e-12;
                        if hilbert {
                            let oracle = 1.0 - (1.0 - 0.25 * m.distance * m.distance).max(0.0).sqrt();
                            margin = margin.min(m.gap - oracle + 1e-12);
                        }
                        return Ok(margin);
                    }
                    Err(Error::InvalidArgument(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::InvalidArgument(format!("no pair at distance >= {eps}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    // margins already carry the strict 1e-12 requirement
    let mut rec = AuditRecord::from_margins(format!("uniform_convexity_eps{eps}"), &margins, 0.0);
    rec.passes = margins.iter().all(|m| *m > 0.0 || (hilbert && *m >= 0.0));
    Ok(rec)
}

/// Radial trapezoid parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpSpec {
    pub s0: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub delta: f64,
}

impl BumpSpec {
    pub fn new(s0: f64, r_in: f64, r_out: f64, delta: f64) -> Self {
        Self { s0, r_in, r_out, delta }
    }

    pub fn validate(&self, r_omega: f64) -> Result<()> {
        if !(self.s0.is_finite() && 0.0 < self.r_in && self.r_in < self.r_out && self.r_out < r_omega) {
            return Err(Error::InvalidArgument(format!(
                "bump needs 0 < r_in < R_out < R_omega, got r_in={}, R_out={}, R_omega={r_omega}",
                self.r_in, self.r_out
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    /// `r + δ (R - r)`.
    pub fn plateau_radius(&self) -> f64 {
        self.r_in + self.delta * (self.r_out - self.r_in)
    }
}

/// A trapezoid on the grid: `s0` up to node `plateau_node`, linear down to 0
/// at node `support_node`, zero beyond.
#[derive(Debug, Clone)]
pub struct Bump {
    pub spec: BumpSpec,
    pub function: DiscreteFunction,
    pub plateau_node: usize,
    pub support_node: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BumpConditions {
    /// Closed support inside the open ball of radius `R_out`.
    pub support: bool,
    /// `u ≡ s0` on the ball of radius `r + δ(R - r)`.
    pub plateau: bool,
    /// `‖u‖_∞ = |s0|`.
    pub sup_norm: bool,
}

impl BumpConditions {
    pub fn all(&self) -> bool {
        self.support && self.plateau && self.sup_norm
    }
}

/// Builds the trapezoid. The plateau radius snaps up to the next node and the
/// support radius down to the last node strictly inside `R_out`, so all three
/// conditions hold exactly.
pub fn build_bump(spec: BumpSpec, grid: &Arc<RadialGrid>) -> Result<Bump> {
    spec.validate(grid.r_omega())?;
    let nodes = grid.nodes();
    let rho = spec.plateau_radius();
    let plateau_node = nodes
        .iter()
        .position(|&r| r >= rho)
        .ok_or_else(|| Error::InvalidArgument("plateau radius beyond the grid".into()))?;
    let support_node = nodes
        .iter()
        .rposition(|&r| r < spec.r_out)
        .ok_or_else(|| Error::InvalidArgument("no node inside R_out".into()))?;
    if plateau_node >= support_node {
        return Err(Error::InvalidArgument(format!(
            "no grid node in the descent band [{rho}, {})",
            spec.r_out
        )));
    }
    let (ra, rb) = (nodes[plateau_node], nodes[support_node]);
    let coeffs = (0..grid.dofs())
        .map(|i| {
            if i <= plateau_node {
                spec.s0
            } else if i < support_node {
                spec.s0 * ((rb - nodes[i]) / (rb - ra))
            } else {
                0.0
            }
        })
        .collect();
    Ok(Bump {
        spec,
        function: DiscreteFunction::new(grid.clone(), coeffs)?,
        plateau_node,
        support_node,
    })
}

impl Bump {
    /// Re-checks the three conditions on the nodal values.
    pub fn conditions(&self) -> BumpConditions {
        let grid = self.function.grid();
        let nodes = grid.nodes();
        let values: Vec<f64> = (0..nodes.len()).map(|i| self.function.node_value(i)).collect();
        let last_nonzero = values.iter().rposition(|v| *v != 0.0);
        let support = match last_nonzero {
            None => true,
            // linear interpolation vanishes from the next node on
            Some(i) => i + 1 < nodes.len() && nodes[i + 1] < self.spec.r_out,
        };
        let rho = self.spec.plateau_radius();
        let plateau = nodes
            .iter()
            .zip(&values)
            .take_while(|(r, _)| **r < rho)
            .all(|(_, v)| *v == self.spec.s0)
            && nodes
                .iter()
                .position(|&r| r >= rho)
                .is_some_and(|i| values[i] == self.spec.s0);
        let sup_norm = self.function.sup_norm() == self.spec.s0.abs();
        BumpConditions { support, plateau, sup_norm }
    }
}

/// Comparison of `J1(u_δ)` with the plateau/annulus volume estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeBookkeeping {
    pub j1: f64,
    /// `F(s0) V ρ^n - max|F| V (R^n - ρ^n)`.
    pub bound_annulus: f64,
    /// `F(s0) V ρ^n - max|F| V (R - ρ)^n`.
    pub bound_literal: f64,
    pub passes_annulus: bool,
    pub passes_literal: bool,
}

pub fn volume_bookkeeping(bump: &Bump, functional: &EnergyFunctional) -> Result<VolumeBookkeeping> {
    let f = functional.f();
    let n = functional.params().n as i32;
    let s0 = bump.spec.s0;
    let samples = 2000;
    let max_f = (0..=samples)
        .flat_map(|i| {
            let t = s0.abs() * i as f64 / samples as f64;
            [f.anti(t).abs(), f.anti(-t).abs()]
        })
        .fold(0.0_f64, f64::max);
    let vol = unit_ball_volume(functional.params().n);
    let rho = bump.spec.plateau_radius();
    let big_r = bump.spec.r_out;
    let inner = f.anti(s0) * vol * rho.powi(n);
    let bound_annulus = inner - max_f * vol * (big_r.powi(n) - rho.powi(n));
    let bound_literal = inner - max_f * vol * (big_r - rho).powi(n);
    let j1 = functional.j1_value(bump.function.coeffs())?;
    let slack = 1e-10 * j1.abs().max(1.0);
    Ok(VolumeBookkeeping {
        j1,
        bound_annulus,
        bound_literal,
        passes_annulus: j1 >= bound_annulus - slack,
        passes_literal: j1 >= bound_literal - slack,
    })
}

/// `J1(t u) / Φ(t u)` along one direction.
#[derive(Debug, Clone)]
pub struct RatioProbe {
    /// Normalized to `‖·‖_* = 1`.
    pub direction: DiscreteFunction,
    pub t_values: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Exponent recorded with the probe; not used in the computation.
    pub eta: f64,
}

/// Default probe exponent: half of `min(p²/(n-p), p-1)`.
pub fn default_eta(p: f64, n: u32) -> f64 {
    0.5 * (p * p / (f64::from(n) - p)).min(p - 1.0)
}

/// `t = 10^{-3}, 10^{-2.5}, ..., 10^{3}`.
pub fn default_t_values() -> Vec<f64> {
    (0..=12).map(|k| 10f64.powf(-3.0 + 0.5 * k as f64)).collect()
}

pub fn ratio_curve(direction: &DiscreteFunction, functional: &EnergyFunctional, t_values: &[f64]) -> Result<RatioProbe> {
    let norm = functional.norm_star(direction);
    if !(norm > 0.0) {
        return Err(Error::InvalidArgument("ratio probe needs a nonzero direction".into()));
    }
    let direction = direction.scaled(1.0 / norm);
    let ratios = t_values
        .iter()
        .map(|&t| {
            let c: Vec<f64> = direction.coeffs().iter().map(|v| t * v).collect();
            let phi = functional.phi_value(&c);
            Ok(functional.j1_value(&c)? / phi)
        })
        .collect::<Result<Vec<_>>>()?;
    let p = functional.params();
    Ok(RatioProbe {
        direction,
        t_values: t_values.to_vec(),
        ratios,
        eta: default_eta(p.p, p.n),
    })
}

/// Ratio threshold at `t = 1e-3` and `t = 1e3`.
pub const RATIO_THRESHOLD: f64 = 0.05;

/// `J1/Φ <= 0.05` at both extreme decades along random directions.
pub fn ratio_limit_audit(functional: &EnergyFunctional, directions: usize, stream: SampleStream) -> Result<[AuditRecord; 2]> {
    let stream = stream.fork(TAG_RATIO);
    let t = [1e-3, 1e3];
    let probes = (0..directions)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream.rng(k as u64);
            let u = random_smooth(functional.grid(), &mut rng, 1.0);
            ratio_curve(&u, functional, &t)
        })
        .collect::<Result<Vec<_>>>()?;
    let small: Vec<f64> = probes.iter().map(|p| RATIO_THRESHOLD - p.ratios[0]).collect();
    let large: Vec<f64> = probes.iter().map(|p| RATIO_THRESHOLD - p.ratios[1]).collect();
    Ok([
        AuditRecord::from_margins("ratio_limit_zero", &small, 0.0),
        AuditRecord::from_margins("ratio_limit_infinity", &large, 0.0),
    ])
}

/// Fourth-order central difference of `E` along `v` against `⟨E'(u), v⟩`.
///
/// The step runs over `10^{-3..-7} ‖u‖_∞/‖v‖_∞`; the estimate kept is the one
/// where two consecutive steps agree best, which steps past the kinks of
/// `|u'|^p` without drowning in rounding.
pub fn directional_derivative_error(u: &[f64], v: &[f64], functional: &EnergyFunctional) -> Result<f64> {
    let umax = u.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let vmax = v.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let base = if umax > 0.0 { umax } else { vmax } / vmax;
    let at = |s: f64| -> Result<f64> {
        let c: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + s * b).collect();
        functional.energy_value(&c)
    };
    let estimates = (3..=7)
        .map(|k| {
            let h = base * 10f64.powi(-k);
            Ok((8.0 * (at(h)? - at(-h)?) - (at(2.0 * h)? - at(-2.0 * h)?)) / (12.0 * h))
        })
        .collect::<Result<Vec<f64>>>()?;
    let fd = estimates
        .windows(2)
        .min_by(|a, b| (a[0] - a[1]).abs().total_cmp(&(b[0] - b[1]).abs()))
        .map(|w| w[1])
        .unwrap_or(estimates[0]);
    let an = dot(&functional.residual(u)?, v);
    Ok((fd - an).abs() / an.abs().max(f64::MIN_POSITIVE))
}

/// Finite-difference gradient audit on random `(u, v)`.
pub fn gradient_audit(functional: &EnergyFunctional, samples: usize, stream: SampleStream) -> Result<AuditRecord> {
    let stream = stream.fork(TAG_GRADIENT);
    let margins = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream.rng(k as u64);
            let amplitude = 10f64.powf(rng.random_range(-1.0..=0.5));
            let u = random_smooth(functional.grid(), &mut rng, amplitude);
            let v = random_function(functional.grid(), &mut rng);
            Ok(1e-6 - directional_derivative_error(u.coeffs(), v.coeffs(), functional)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let p = functional.params();
    Ok(AuditRecord::from_margins(
        format!("gradient_fd_p{}_mu{}", p.p, p.mu),
        &margins,
        0.0,
    ))
}

/// Records for the four growth/limit conditions on `f` and `g`.
pub fn nonlinearity_audit(f: &Nonlinearity, g: &Nonlinearity, p: f64) -> Result<Vec<AuditRecord>> {
    let f1 = check_f1(f, p)?;
    let f2 = check_f2(f, p)?;
    let f3 = check_f3(f)?;
    let g1 = check_g1(g)?;
    let tail = |r: &crate::nonlinear::LimitReport| {
        crate::nonlinear::LIMIT_THRESHOLD - r.samples.iter().rev().take(2).fold(0.0_f64, |m, s| m.max(s.1.abs()))
    };
    Ok(vec![
        AuditRecord::single("condition_f1", tail(&f1), f1.passes),
        AuditRecord::single("condition_f2", tail(&f2), f2.passes),
        AuditRecord::single("condition_f3", f3.f_value, f3.passes),
        AuditRecord::single("condition_g1", g1.declared_c_g - g1.fitted_c_g, g1.passes),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinear::{example_f, example_g, zero, ExampleParams, Kind};
    use crate::types::{make_grid, EnergyParams};
    use std::f64::consts::PI;

    fn functional(p: f64, n: u32, mu: f64, elements: usize) -> EnergyFunctional {
        let params = EnergyParams::new(p, n, mu, 1.0, 0.0, 1.0).unwrap();
        let grid = Arc::new(make_grid(elements, 0.99, 1.0).unwrap());
        let ex = ExampleParams::default();
        EnergyFunctional::new(params, grid, example_f(&ex, p).unwrap(), example_g(&ex).unwrap()).unwrap()
    }

    #[test]
    fn chabrowski_equality_at_two() {
        let c = chabrowski_check(&[1.0, 2.0, -0.5], &[0.3, -1.0, 4.0], 2.0);
        assert!((c.lhs - c.rhs).abs() <= 1e-14 * c.rhs);
        let z = chabrowski_check(&[1.0, 2.0], &[1.0, 2.0], 3.0);
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
        assert!(z.passes);
    }

    #[test]
    fn chabrowski_random_pairs() {
        for p in [2.0, 3.0, 4.0] {
            let rec = chabrowski_audit(p, 3, 2000, SampleStream::new(1));
            assert!(rec.passes, "{rec:?}");
        }
    }

    #[test]
    fn monotonicity_is_equality_in_linear_case() {
        let ef = functional(2.0, 3, 0.0, 32);
        let u1 = DiscreteFunction::from_fn(ef.grid().clone(), |r| (1.0 - r) * (3.0 * r).sin());
        let u2 = DiscreteFunction::from_fn(ef.grid().clone(), |r| 1.0 - r * r);
        let m = monotonicity_gap(&u1, &u2, &ef).unwrap();
        assert!((m.pairing - m.lower_bound).abs() <= 1e-12 * m.pairing);
        let same = monotonicity_gap(&u1, &u1, &ef).unwrap();
        assert_eq!((same.pairing, same.lower_bound), (0.0, 0.0));
        assert!(same.passes);
    }

    #[test]
    fn monotonicity_random_p3() {
        let rec = monotonicity_audit(&functional(3.0, 5, 1.0, 32), 50, SampleStream::new(2)).unwrap();
        assert!(rec.passes, "{rec:?}");
    }

    #[test]
    fn midpoint_antipodal_and_parallelogram() {
        let ef = functional(2.0, 3, 1.0, 32);
        let u = DiscreteFunction::from_fn(ef.grid().clone(), |r| 1.0 - r);
        let m = midpoint_convexity_check(&u, &-&u, &ef, 0.5).unwrap();
        assert!(m.midpoint_norm.abs() < 1e-15 && (m.gap - 1.0).abs() < 1e-15);
        assert!(midpoint_convexity_check(&u, &u.scaled(3.0), &ef, 0.1).is_err());
        let rec = convexity_audit(&ef, 0.5, 50, SampleStream::new(3)).unwrap();
        assert!(rec.passes, "{rec:?}");
    }

    #[test]
    fn metric_collinear_is_equality() {
        let ef = functional(2.0, 3, 0.5, 32);
        let u = DiscreteFunction::from_fn(ef.grid().clone(), |r| 1.0 - r);
        let w = DiscreteFunction::from_fn(ef.grid().clone(), |r| (PI * r / 2.0).cos() * 2.0);
        let v = (&u + &w).scaled(0.5);
        let m = metric_combination_check(&u, &v, &w, &ef).unwrap();
        assert!((m.lhs - m.rhs).abs() <= 1e-12 * m.rhs);
        let id = metric_combination_check(&u, &u, &w, &ef).unwrap();
        assert!(id.passes);
        assert!((combined_metric(&u, &w, &ef) - ef.norm_star(&(&u - &w))).abs() < 1e-13);
    }

    #[test]
    fn bump_conditions_hold_exactly() {
        let ef = functional(2.0, 3, 0.1, 64);
        let bump = build_bump(BumpSpec::new(0.5 * PI, 0.3, 0.8, 0.9), ef.grid()).unwrap();
        assert!(bump.conditions().all());
        let b = ef.energy(&bump.function).unwrap();
        assert!(b.j1 > 0.0 && b.phi > 0.0);
        let vb = volume_bookkeeping(&bump, &ef).unwrap();
        assert!(vb.passes_annulus && vb.passes_literal, "{vb:?}");

        // the band [0.795, 0.8) needs a fine grid
        assert!(build_bump(BumpSpec::new(0.5 * PI, 0.3, 0.8, 0.99), ef.grid()).is_err());
        let fine = EnergyFunctional::new(
            *ef.params(),
            Arc::new(make_grid(1024, 1.0, 1.0).unwrap()),
            ef.f().clone(),
            ef.g().clone(),
        )
        .unwrap();
        let near_one = build_bump(BumpSpec::new(0.5 * PI, 0.3, 0.8, 0.99), fine.grid()).unwrap();
        assert!(near_one.conditions().all());
        assert!(fine.j1_value(near_one.function.coeffs()).unwrap() > 0.0);

        let flat = build_bump(BumpSpec::new(0.0, 0.3, 0.8, 0.5), ef.grid()).unwrap();
        assert!(flat.function.is_zero());
        assert!(flat.conditions().all());
    }

    #[test]
    fn bump_rejects_bad_specs() {
        let grid = Arc::new(make_grid(4, 1.0, 1.0).unwrap());
        assert!(build_bump(BumpSpec::new(1.0, 0.3, 0.4, 0.5), &grid).is_err());
        assert!(build_bump(BumpSpec::new(1.0, 0.5, 0.3, 0.5), &grid).is_err());
        assert!(build_bump(BumpSpec::new(1.0, 0.1, 0.9, 1.0), &grid).is_err());
        assert!(build_bump(BumpSpec::new(1.0, 0.1, 1.0, 0.5), &grid).is_err());
    }

    #[test]
    fn ratio_probes() {
        let ef = functional(2.0, 3, 0.1, 64);
        let bump = build_bump(BumpSpec::new(0.5 * PI, 0.3, 0.8, 0.9), ef.grid()).unwrap();
        let probe = ratio_curve(&bump.function, &ef, &[bump.function.sup_norm().recip() * 0.5 * PI]).unwrap();
        assert!(probe.ratios[0] > 0.0);
        let [small, large] = ratio_limit_audit(&ef, 20, SampleStream::new(4)).unwrap();
        assert!(small.passes && large.passes, "{small:?} {large:?}");

        let params = *ef.params();
        let flat = EnergyFunctional::new(params, ef.grid().clone(), zero(Kind::Forcing), zero(Kind::Disturbance)).unwrap();
        let probe = ratio_curve(&bump.function, &flat, &default_t_values()).unwrap();
        assert!(probe.ratios.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn hardy_and_gradient_audits() {
        let ef = functional(2.0, 3, 0.1, 64);
        assert!(hardy_audit(&ef, 100, SampleStream::new(5)).passes);
        let rec = gradient_audit(&ef, 40, SampleStream::new(6)).unwrap();
        assert!(rec.passes, "{rec:?}");
        let ef3 = functional(3.0, 4, 1.0, 64);
        let rec = gradient_audit(&ef3, 40, SampleStream::new(6)).unwrap();
        assert!(rec.passes, "{rec:?}");
    }
}
