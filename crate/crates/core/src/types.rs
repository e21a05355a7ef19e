//! Problem parameters, derived constants, radial grids and discrete functions.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::functionals::PowerIntegrals;
use crate::optim;
use crate::rng::SampleStream;

/// Default number of radial elements.
pub const DEFAULT_ELEMENTS: usize = 256;
/// Default ratio between the lengths of consecutive elements (inner over outer).
pub const DEFAULT_GRADING: f64 = 0.99;

/// Parameters of the singular Dirichlet problem on the ball `B(0, r_omega)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub p: f64,
    pub n: u32,
    pub mu: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub r_omega: f64,
}

impl EnergyParams {
    pub fn new(p: f64, n: u32, mu: f64, lambda: f64, gamma: f64, r_omega: f64) -> Result<Self> {
        let params = Self {
            p,
            n,
            mu,
            lambda,
            gamma,
            r_omega,
        };
        params.validate()?;
        Ok(params)
    }

    /// Unit ball of dimension `n` with `λ = γ = 0`.
    pub fn unit_ball(p: f64, n: u32, mu: f64) -> Result<Self> {
        Self::new(p, n, mu, 0.0, 0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let n = f64::from(self.n);
        if !(self.p.is_finite() && self.p >= 2.0 && self.p < n) {
            return Err(Error::InvalidArgument(format!(
                "need 2 <= p < n, got p = {}, n = {}",
                self.p, self.n
            )));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::InvalidArgument(format!("mu must be >= 0, got {}", self.mu)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if !(self.r_omega.is_finite() && self.r_omega > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "R_omega must be > 0, got {}",
                self.r_omega
            )));
        }
        Ok(())
    }

    pub fn with_lambda_gamma(&self, lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(self.p, self.n, self.mu, lambda, gamma, self.r_omega)
    }

    /// Exponent of the radial weight carried by the Hardy term, `n - 1 - p`.
    pub fn singular_alpha(&self) -> f64 {
        f64::from(self.n) - 1.0 - self.p
    }

    /// Exponent of the radial measure, `n - 1`.
    pub fn radial_alpha(&self) -> f64 {
        f64::from(self.n) - 1.0
    }

    /// Critical Sobolev exponent `pn / (n - p)`.
    pub fn critical_exponent(&self) -> f64 {
        let n = f64::from(self.n);
        self.p * n / (n - self.p)
    }
}

/// `(p / (n - p))^p`.
pub fn hardy_constant(p: f64, n: u32) -> f64 {
    (p / (f64::from(n) - p)).powf(p)
}

/// `2 / (p (2^{p-1} - 1))`, the monotonicity constant of `t ↦ |t|^{p-2} t`.
pub fn chabrowski_constant(p: f64) -> f64 {
    2.0 / (p * ((p - 1.0).exp2() - 1.0))
}

/// Lebesgue measure of the unit ball in `R^n`.
pub fn unit_ball_volume(n: u32) -> f64 {
    // V_0 = 1, V_1 = 2, V_k = 2π/k V_{k-2}
    let mut v = if n % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if n % 2 == 0 { 2 } else { 3 };
    while k <= n {
        v *= 2.0 * PI / f64::from(k);
        k += 2;
    }
    v
}

/// Surface measure of the unit sphere `S^{n-1}`.
pub fn unit_sphere_area(n: u32) -> f64 {
    f64::from(n) * unit_ball_volume(n)
}

/// Constants that depend on the parameters (and, for the Poincaré estimate, on the grid).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub hardy_c: f64,
    pub chabrowski_a: f64,
    pub poincare_c: f64,
    pub sphere_area: f64,
    pub ball_volume: f64,
}

/// Number of random coefficient vectors in the Poincaré probe family.
const POINCARE_RANDOM_PROBES: u64 = 100;
const POINCARE_SEED: u64 = 0x5eed_0000_0000_0001;

/// Computes the closed-form constants and estimates the discrete Poincaré constant.
///
/// The Poincaré constant is estimated as the largest value of
/// `‖u‖_{L^p} / ‖∇u‖_{L^p}` over the nodal hat functions, a fixed family of
/// smooth radial profiles and 100 seeded random coefficient vectors, followed
/// by a preconditioned ascent from the best probe.
pub fn derived_constants(params: &EnergyParams, grid: &Arc<RadialGrid>) -> Result<DerivedConstants> {
    params.validate()?;
    let ball_volume = unit_ball_volume(params.n);
    Ok(DerivedConstants {
        hardy_c: hardy_constant(params.p, params.n),
        chabrowski_a: chabrowski_constant(params.p),
        poincare_c: estimate_poincare(params, grid)?,
        sphere_area: f64::from(params.n) * ball_volume,
        ball_volume,
    })
}

fn estimate_poincare(params: &EnergyParams, grid: &Arc<RadialGrid>) -> Result<f64> {
    let p = params.p;
    let ints = PowerIntegrals::new(params, grid)?;
    let quotient = |u: &[f64]| -> f64 {
        let num = ints.lp_p(u);
        let den = ints.grad_p(u);
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    };

    let m = grid.dofs();
    let mut probes: Vec<Vec<f64>> = Vec::new();
    for i in 0..m {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        probes.push(e);
    }
    let r_omega = grid.r_omega();
    for k in 1..=3 {
        probes.push(grid.sample(|r| (1.0 - (r / r_omega).powi(2)).powi(k)));
    }
    probes.push(grid.sample(|r| (0.5 * PI * r / r_omega).cos()));
    let stream = SampleStream::new(POINCARE_SEED);
    for k in 0..POINCARE_RANDOM_PROBES {
        let mut rng = stream.rng(k);
        probes.push((0..m).map(|_| rng.random_range(-1.0..1.0)).collect());
    }

    let (best, best_q) = probes
        .into_iter()
        .map(|u| {
            let q = quotient(&u);
            (u, q)
        })
        .fold((Vec::new(), f64::NEG_INFINITY), |acc, (u, q)| {
            if q > acc.1 {
                (u, q)
            } else {
                acc
            }
        });

    let outcome = optim::preconditioned_ascent(
        best,
        |u| {
            let num = ints.lp_p(u);
            let den = ints.grad_p(u);
            if !(den > 0.0) {
                return Err(Error::InvalidArgument("zero gradient norm".into()));
            }
            let q = num / den;
            let gn = ints.lp_p_gradient(u);
            let gd = ints.grad_p_gradient(u);
            let grad: Vec<f64> = gn.iter().zip(&gd).map(|(a, b)| (a - q * b) / den).collect();
            Ok((q, grad))
        },
        |u, rhs| ints.grad_p_hessian(u, 1e-10).solve(rhs),
        400,
        1e-13,
    )?;
    Ok(outcome.value.max(best_q).powf(1.0 / p))
}

/// Graded partition `0 = r_0 < r_1 < ... < r_M = R` of the radial interval.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    grading: f64,
}

/// Builds a grid with `elements` cells whose lengths grow by `1 / grading`
/// from one cell to the next, so the smallest cell touches the origin.
pub fn make_grid(elements: usize, grading: f64, r_omega: f64) -> Result<RadialGrid> {
    if elements < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 elements, got {elements}"
        )));
    }
    if !(grading > 0.0 && grading <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "grading must lie in (0, 1], got {grading}"
        )));
    }
    if !(r_omega.is_finite() && r_omega > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "R_omega must be > 0, got {r_omega}"
        )));
    }
    let m = elements as f64;
    let mut nodes: Vec<f64> = if grading == 1.0 {
        (0..=elements).map(|k| r_omega * k as f64 / m).collect()
    } else {
        // r_k = R (q^k - 1) / (q^M - 1) with q = 1 / grading
        let ln_q = -grading.ln();
        let denom = (m * ln_q).exp_m1();
        (0..=elements)
            .map(|k| r_omega * ((k as f64 * ln_q).exp_m1() / denom))
            .collect()
    };
    nodes[0] = 0.0;
    nodes[elements] = r_omega;
    if nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(format!(
            "grading {grading} with {elements} elements underflows the innermost element"
        )));
    }
    Ok(RadialGrid { nodes, grading })
}

impl RadialGrid {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    /// Number of elements `M`.
    pub fn elements(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Number of free coefficients (every node except the outer boundary).
    pub fn dofs(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn r_omega(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Endpoints of element `e`.
    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    pub fn element_length(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }

    /// Nodal values of `f` at the free nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes[..self.dofs()].iter().map(|&r| f(r)).collect()
    }

    /// Index of the element containing `r` (clamped to the grid).
    pub fn locate(&self, r: f64) -> usize {
        let idx = self.nodes.partition_point(|&x| x <= r);
        idx.saturating_sub(1).min(self.elements() - 1)
    }
}

/// Continuous piecewise-linear radial function vanishing at `r = R`.
///
/// Stores the values at `r_0, ..., r_{M-1}`; the value at `r_M` is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFunction {
    grid: Arc<RadialGrid>,
    coeffs: Vec<f64>,
}

impl DiscreteFunction {
    pub fn new(grid: Arc<RadialGrid>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != grid.dofs() {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                grid.dofs(),
                coeffs.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let m = grid.dofs();
        Self {
            grid,
            coeffs: vec![0.0; m],
        }
    }

    /// Interpolates `f` at the free nodes. The boundary value is dropped.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let coeffs = grid.sample(f);
        Self { grid, coeffs }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), coeffs)
    }

    /// Value at node `i`, including the boundary node `i = M`.
    pub fn node_value(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    /// Derivative `u'` on element `e`.
    pub fn slope(&self, e: usize) -> f64 {
        (self.node_value(e + 1) - self.node_value(e)) / self.grid.element_length(e)
    }

    pub fn value_at(&self, r: f64) -> f64 {
        if r >= self.grid.r_omega() {
            return 0.0;
        }
        let e = self.grid.locate(r.max(0.0));
        let (a, b) = self.grid.element(e);
        let s = (r - a) / (b - a);
        (1.0 - s) * self.node_value(e) + s * self.node_value(e + 1)
    }

    /// Largest absolute nodal value.
    pub fn sup_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.nodes == other.grid.nodes
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().map(|c| alpha * c).collect(),
        }
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Self {
        debug_assert!(self.same_grid(other));
        Self {
            grid: self.grid.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        }
    }

    /// Pairs of `(r, u(r))` at every node, boundary included.
    pub fn profile(&self) -> Vec<(f64, f64)> {
        self.grid
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &r)| (r, self.node_value(i)))
            .collect()
    }
}

impl Add for &DiscreteFunction {
    type Output = DiscreteFunction;
    fn add(self, rhs: Self) -> DiscreteFunction {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &DiscreteFunction {
    type Output = DiscreteFunction;
    fn sub(self, rhs: Self) -> DiscreteFunction {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<&DiscreteFunction> for f64 {
    type Output = DiscreteFunction;
    fn mul(self, rhs: &DiscreteFunction) -> DiscreteFunction {
        rhs.scaled(self)
    }
}

impl Neg for &DiscreteFunction {
    type Output = DiscreteFunction;
    fn neg(self) -> DiscreteFunction {
        self.scaled(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_bisection() {
        let g = make_grid(2, 1.0, 1.0).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn too_few_elements() {
        assert!(matches!(make_grid(1, 1.0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(4, 0.0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(4, 1.5, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(4, 0.5, -1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn geometric_lengths() {
        // lengths 1:2:4:8 summing to one
        let g = make_grid(4, 0.5, 1.0).unwrap();
        let expected = [1.0 / 15.0, 2.0 / 15.0, 4.0 / 15.0, 8.0 / 15.0];
        for (e, want) in expected.iter().enumerate() {
            assert!((g.element_length(e) - want).abs() < 1e-15);
        }
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.nodes()[4], 1.0);
    }

    #[test]
    fn refinement_keeps_endpoints() {
        for &grading in &[1.0, 0.99, 0.9, 0.7] {
            for m in [4usize, 8, 16, 32, 64] {
                let coarse = make_grid(m, grading, 2.5).unwrap();
                let fine = make_grid(2 * m, grading, 2.5).unwrap();
                assert_eq!(coarse.nodes()[0], fine.nodes()[0]);
                assert_eq!(coarse.r_omega(), fine.r_omega());
            }
        }
    }

    #[test]
    fn closed_form_constants() {
        assert_eq!(hardy_constant(2.0, 3), 4.0);
        for n in 3..9 {
            assert_eq!(chabrowski_constant(2.0), 1.0);
            let ratio = unit_sphere_area(n) / unit_ball_volume(n);
            assert!((ratio - f64::from(n)).abs() <= 1e-12 * f64::from(n));
        }
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        for &p in &[2.0, 2.5, 3.0, 4.0, 7.0] {
            let a = chabrowski_constant(p);
            assert!(a > 0.0 && a <= 1.0);
        }
    }

    #[test]
    fn params_validation() {
        assert!(EnergyParams::unit_ball(1.5, 3, 0.1).is_err());
        assert!(EnergyParams::unit_ball(3.0, 3, 0.1).is_err());
        assert!(EnergyParams::unit_ball(2.0, 3, -0.1).is_err());
        assert!(EnergyParams::new(2.0, 3, 0.1, 1.0, 0.0, 0.0).is_err());
        assert!(EnergyParams::unit_ball(2.0, 3, 0.0).is_ok());
    }

    #[test]
    fn derived_constants_are_deterministic() {
        let params = EnergyParams::unit_ball(2.0, 3, 0.1).unwrap();
        let grid = Arc::new(make_grid(64, 0.97, 1.0).unwrap());
        let a = derived_constants(&params, &grid).unwrap();
        let b = derived_constants(&params, &grid).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hardy_c, 4.0);
        assert_eq!(a.chabrowski_a, 1.0);
        // the continuous Poincaré constant of the unit 3-ball is 1/π
        assert!((a.poincare_c - 1.0 / PI).abs() < 5e-3, "{}", a.poincare_c);
    }

    #[test]
    fn function_arithmetic() {
        let grid = Arc::new(make_grid(4, 1.0, 1.0).unwrap());
        let u = DiscreteFunction::from_fn(grid.clone(), |r| 1.0 - r);
        assert_eq!(u.coeffs(), &[1.0, 0.75, 0.5, 0.25]);
        assert_eq!(u.node_value(4), 0.0);
        assert!((u.value_at(0.125) - 0.875).abs() < 1e-15);
        assert_eq!(u.value_at(1.0), 0.0);
        assert!((u.slope(2) + 1.0).abs() < 1e-15);
        let w = &u - &u;
        assert!(w.is_zero());
        assert_eq!((2.0 * &u).coeffs()[0], 2.0);
        assert!(DiscreteFunction::new(grid, vec![0.0; 3]).is_err());
    }
}
