//! Energy `E = Φ - λ J1 - γ J2`, its nodal gradient, the Newton matrix and the
//! norms built from `Φ`.
//!
//! Every reported integral is the full `n`-dimensional one: radial integrals
//! carry the factor `|S^{n-1}|`, so for instance
//! `Φ(u) = |S^{n-1}|/p (∫ |u'|^p r^{n-1} dr + μ ∫ |u|^p r^{n-1-p} dr)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{norm2, Tridiagonal};
use crate::nonlinear::{Kind, Nonlinearity};
use crate::quadrature::{self, QuadratureRule, WeightedRule};
use crate::types::{unit_sphere_area, DiscreteFunction, EnergyParams, RadialGrid};

/// Default regularization of `|u'|^{p-2}` inside the Newton matrix.
pub const DEFAULT_EPS_REG: f64 = 1e-10;

/// Radial power integrals without the sphere factor:
/// `∫ |u'|^p r^{n-1}`, `∫ |u|^p r^{n-1}` and `∫ |u|^p r^{n-1-p}`.
#[derive(Debug, Clone)]
pub struct PowerIntegrals {
    p: f64,
    dofs: usize,
    lengths: Vec<f64>,
    /// `∫_e r^{n-1} dr`.
    grad_moment: Vec<f64>,
    radial: WeightedRule,
    singular: WeightedRule,
    /// Exact `∫_e r^{n-1-p} φ_i φ_j`, used when `p = 2`.
    singular_moments: Option<Vec<[[f64; 2]; 2]>>,
    /// Exact `∫_e r^{n-1} φ_i φ_j`.
    mass_moments: Vec<[[f64; 2]; 2]>,
    mass_vectors: Vec<[f64; 2]>,
}

#[inline]
fn node(c: &[f64], i: usize) -> f64 {
    c.get(i).copied().unwrap_or(0.0)
}

/// `|x|^{p-2} x`.
#[inline]
fn signed_pow(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(p - 1.0).copysign(x)
    }
}

impl PowerIntegrals {
    pub fn new(params: &EnergyParams, grid: &RadialGrid) -> Result<Self> {
        params.validate()?;
        let rule = QuadratureRule::gauss_legendre(quadrature::DEFAULT_ORDER);
        let radial_alpha = params.radial_alpha();
        let singular_alpha = params.singular_alpha();
        let m = grid.elements();
        let mut grad_moment = Vec::with_capacity(m);
        let mut mass_moments = Vec::with_capacity(m);
        let mut mass_vectors = Vec::with_capacity(m);
        for e in 0..m {
            let mm = quadrature::moment(grid, e, radial_alpha)?;
            grad_moment.push(mm.vector[0] + mm.vector[1]);
            mass_moments.push(mm.matrix);
            mass_vectors.push(mm.vector);
        }
        let singular_moments = if params.p == 2.0 {
            Some(
                (0..m)
                    .map(|e| quadrature::moment(grid, e, singular_alpha).map(|mm| mm.matrix))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        Ok(Self {
            p: params.p,
            dofs: grid.dofs(),
            lengths: (0..m).map(|e| grid.element_length(e)).collect(),
            grad_moment,
            radial: WeightedRule::new(grid, radial_alpha, &rule)?,
            singular: WeightedRule::new(grid, singular_alpha, &rule)?,
            singular_moments,
            mass_moments,
            mass_vectors,
        })
    }

    pub fn dofs(&self) -> usize {
        self.dofs
    }

    fn slope(&self, c: &[f64], e: usize) -> f64 {
        (node(c, e + 1) - node(c, e)) / self.lengths[e]
    }

    /// `∫ |u'|^p r^{n-1} dr`.
    pub fn grad_p(&self, c: &[f64]) -> f64 {
        (0..self.lengths.len())
            .map(|e| self.slope(c, e).abs().powf(self.p) * self.grad_moment[e])
            .sum()
    }

    pub fn grad_p_gradient(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dofs];
        for e in 0..self.lengths.len() {
            let s = self.slope(c, e);
            let k = self.p * signed_pow(s, self.p) * self.grad_moment[e] / self.lengths[e];
            out[e] -= k;
            if e + 1 < self.dofs {
                out[e + 1] += k;
            }
        }
        out
    }

    /// Regularized second derivative of `∫ |u'|^p r^{n-1} dr`.
    pub fn grad_p_hessian(&self, c: &[f64], eps: f64) -> Tridiagonal {
        let mut t = Tridiagonal::zeros(self.dofs);
        for e in 0..self.lengths.len() {
            let s = self.slope(c, e);
            let h = self.lengths[e];
            let w = self.p * (self.p - 1.0) * reg_pow(s, self.p, eps) * self.grad_moment[e] / (h * h);
            t.add_element_block(e, [[w, -w], [-w, w]]);
        }
        t
    }

    fn rule_sum(rule: &WeightedRule, c: &[f64], h: impl Fn(f64) -> f64) -> f64 {
        let mut total = 0.0;
        for el in &rule.elements {
            let (u0, u1) = (node(c, el.element), node(c, el.element + 1));
            for (w, hat) in el.weight.iter().zip(&el.hats) {
                total += w * h(hat[0] * u0 + hat[1] * u1);
            }
        }
        total
    }

    fn rule_gradient(rule: &WeightedRule, c: &[f64], dofs: usize, h: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; dofs];
        for el in &rule.elements {
            let e = el.element;
            let (u0, u1) = (node(c, e), node(c, e + 1));
            let mut acc = [0.0; 2];
            for (w, hat) in el.weight.iter().zip(&el.hats) {
                let v = w * h(hat[0] * u0 + hat[1] * u1);
                acc[0] += v * hat[0];
                acc[1] += v * hat[1];
            }
            out[e] += acc[0];
            if e + 1 < dofs {
                out[e + 1] += acc[1];
            }
        }
        out
    }

    fn rule_hessian(rule: &WeightedRule, c: &[f64], dofs: usize, h: impl Fn(f64) -> f64) -> Tridiagonal {
        let mut t = Tridiagonal::zeros(dofs);
        for el in &rule.elements {
            let e = el.element;
            let (u0, u1) = (node(c, e), node(c, e + 1));
            let mut b = [[0.0; 2]; 2];
            for (w, hat) in el.weight.iter().zip(&el.hats) {
                let v = w * h(hat[0] * u0 + hat[1] * u1);
                b[0][0] += v * hat[0] * hat[0];
                b[0][1] += v * hat[0] * hat[1];
                b[1][1] += v * hat[1] * hat[1];
            }
            b[1][0] = b[0][1];
            t.add_element_block(e, b);
        }
        t
    }

    /// `∫ |u|^p r^{n-1} dr`.
    pub fn lp_p(&self, c: &[f64]) -> f64 {
        let p = self.p;
        Self::rule_sum(&self.radial, c, |s| s.abs().powf(p))
    }

    pub fn lp_p_gradient(&self, c: &[f64]) -> Vec<f64> {
        let p = self.p;
        Self::rule_gradient(&self.radial, c, self.dofs, |s| p * signed_pow(s, p))
    }

    /// `∫ |u|^p r^{n-1-p} dr`; exact element moments when `p = 2`.
    pub fn sing_p(&self, c: &[f64]) -> f64 {
        match &self.singular_moments {
            Some(mm) => mm
                .iter()
                .enumerate()
                .map(|(e, m)| {
                    let (a, b) = (node(c, e), node(c, e + 1));
                    m[0][0] * a * a + 2.0 * m[0][1] * a * b + m[1][1] * b * b
                })
                .sum(),
            None => {
                let p = self.p;
                Self::rule_sum(&self.singular, c, |s| s.abs().powf(p))
            }
        }
    }

    pub fn sing_p_gradient(&self, c: &[f64]) -> Vec<f64> {
        match &self.singular_moments {
            Some(mm) => {
                let mut out = vec![0.0; self.dofs];
                for (e, m) in mm.iter().enumerate() {
                    let (a, b) = (node(c, e), node(c, e + 1));
                    out[e] += 2.0 * (m[0][0] * a + m[0][1] * b);
                    if e + 1 < self.dofs {
                        out[e + 1] += 2.0 * (m[1][0] * a + m[1][1] * b);
                    }
                }
                out
            }
            None => {
                let p = self.p;
                Self::rule_gradient(&self.singular, c, self.dofs, |s| p * signed_pow(s, p))
            }
        }
    }

    pub fn sing_p_hessian(&self, c: &[f64], eps: f64) -> Tridiagonal {
        match &self.singular_moments {
            Some(mm) => {
                let mut t = Tridiagonal::zeros(self.dofs);
                for (e, m) in mm.iter().enumerate() {
                    t.add_element_block(e, [[2.0 * m[0][0], 2.0 * m[0][1]], [2.0 * m[1][0], 2.0 * m[1][1]]]);
                }
                t
            }
            None => {
                let p = self.p;
                Self::rule_hessian(&self.singular, c, self.dofs, |s| p * (p - 1.0) * reg_pow(s, p, eps))
            }
        }
    }

    /// `∫ h(u) r^{n-1} dr`, failing on non-finite values.
    pub fn radial_integral(&self, c: &[f64], h: impl Fn(f64) -> f64, what: &str) -> Result<f64> {
        let mut total = 0.0;
        for el in &self.radial.elements {
            let (u0, u1) = (node(c, el.element), node(c, el.element + 1));
            for ((w, hat), r) in el.weight.iter().zip(&el.hats).zip(&el.radius) {
                let v = h(hat[0] * u0 + hat[1] * u1);
                if !v.is_finite() {
                    return Err(Error::Evaluation {
                        what: what.to_string(),
                        radius: *r,
                    });
                }
                total += w * v;
            }
        }
        Ok(total)
    }

    /// `∫ h(u) φ_i r^{n-1} dr` for every free node.
    pub fn radial_load(&self, c: &[f64], h: impl Fn(f64) -> f64, what: &str) -> Result<Vec<f64>> {
        let out = Self::rule_gradient(&self.radial, c, self.dofs, h);
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                what: what.to_string(),
                radius: self.radial.elements[i.min(self.radial.elements.len() - 1)].radius[0],
            });
        }
        Ok(out)
    }

    pub fn radial_hessian(&self, c: &[f64], h: impl Fn(f64) -> f64) -> Tridiagonal {
        Self::rule_hessian(&self.radial, c, self.dofs, h)
    }

    /// Exact `∫ φ_i φ_j r^{n-1} dr`.
    pub fn mass_matrix(&self) -> Tridiagonal {
        let mut t = Tridiagonal::zeros(self.dofs);
        for (e, m) in self.mass_moments.iter().enumerate() {
            t.add_element_block(e, *m);
        }
        t
    }

    /// Exact `∫ φ_i r^{n-1} dr`.
    pub fn mass_vector(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dofs];
        for (e, v) in self.mass_vectors.iter().enumerate() {
            out[e] += v[0];
            if e + 1 < self.dofs {
                out[e + 1] += v[1];
            }
        }
        out
    }
}

/// `(x^2 + eps)^{(p-2)/2}`, exactly 1 at `p = 2`.
#[inline]
fn reg_pow(x: f64, p: f64, eps: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else {
        (x * x + eps).powf(0.5 * (p - 2.0))
    }
}

/// Values of `Φ`, `J1`, `J2` and `E` at one function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub phi: f64,
    pub j1: f64,
    pub j2: f64,
    pub e: f64,
    /// `∫ |∇u|^p dx`.
    pub norm_w_p: f64,
    /// `∫ |u|^p / |x|^p dx`.
    pub norm_sing_p: f64,
}

/// Nodal residuals `⟨·, φ_i⟩` of `E'`, `Φ'`, `J1'` and `J2'`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub total: Vec<f64>,
    pub phi: Vec<f64>,
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
}

impl GradientVector {
    /// Discrete `ℓ²` norm of the total residual (the solver's stopping metric).
    pub fn l2_norm(&self) -> f64 {
        norm2(&self.total)
    }

    /// `sqrt(r^T M^{-1} r)` with `M` the `L²(Ω)` mass matrix.
    pub fn mass_dual_norm(&self, functional: &EnergyFunctional) -> Result<f64> {
        let m = functional.mass_matrix();
        let x = m.solve(&self.total)?;
        Ok(crate::linalg::dot(&x, &self.total).max(0.0).sqrt())
    }
}

/// Discrete energy functional on one grid with fixed nonlinearities.
#[derive(Debug, Clone)]
pub struct EnergyFunctional {
    params: EnergyParams,
    grid: Arc<RadialGrid>,
    f: Nonlinearity,
    g: Nonlinearity,
    sphere_area: f64,
    ints: Arc<PowerIntegrals>,
}

impl EnergyFunctional {
    pub fn new(params: EnergyParams, grid: Arc<RadialGrid>, f: Nonlinearity, g: Nonlinearity) -> Result<Self> {
        params.validate()?;
        if (grid.r_omega() - params.r_omega).abs() > 1e-12 * params.r_omega {
            return Err(Error::InvalidArgument(format!(
                "grid radius {} differs from R_omega {}",
                grid.r_omega(),
                params.r_omega
            )));
        }
        if f.kind() != Kind::Forcing {
            return Err(Error::InvalidArgument(format!("{} is not a forcing term", f.name())));
        }
        if g.kind() != Kind::Disturbance {
            return Err(Error::InvalidArgument(format!("{} is not a disturbance term", g.name())));
        }
        let ints = Arc::new(PowerIntegrals::new(&params, &grid)?);
        Ok(Self {
            sphere_area: unit_sphere_area(params.n),
            params,
            grid,
            f,
            g,
            ints,
        })
    }

    /// Same discretization with `λ`, `γ` replaced; the element tables are shared.
    pub fn with_lambda_gamma(&self, lambda: f64, gamma: f64) -> Result<Self> {
        let mut out = self.clone();
        out.params = self.params.with_lambda_gamma(lambda, gamma)?;
        Ok(out)
    }

    pub fn params(&self) -> &EnergyParams {
        &self.params
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn f(&self) -> &Nonlinearity {
        &self.f
    }

    pub fn g(&self) -> &Nonlinearity {
        &self.g
    }

    pub fn sphere_area(&self) -> f64 {
        self.sphere_area
    }

    pub fn integrals(&self) -> &PowerIntegrals {
        &self.ints
    }

    pub fn dofs(&self) -> usize {
        self.grid.dofs()
    }

    pub fn zero(&self) -> DiscreteFunction {
        DiscreteFunction::zeros(self.grid.clone())
    }

    pub fn function(&self, coeffs: Vec<f64>) -> Result<DiscreteFunction> {
        DiscreteFunction::new(self.grid.clone(), coeffs)
    }

    fn check(&self, u: &DiscreteFunction) -> Result<()> {
        if u.coeffs().len() != self.dofs() || !Arc::ptr_eq(u.grid(), &self.grid) && u.grid().nodes() != self.grid.nodes() {
            return Err(Error::InvalidArgument("function lives on another grid".into()));
        }
        Ok(())
    }

    pub fn energy(&self, u: &DiscreteFunction) -> Result<EnergyBreakdown> {
        self.check(u)?;
        self.energy_coeffs(u.coeffs())
    }

    pub fn energy_coeffs(&self, c: &[f64]) -> Result<EnergyBreakdown> {
        let s = self.sphere_area;
        let p = self.params.p;
        let norm_w_p = s * self.ints.grad_p(c);
        let norm_sing_p = s * self.ints.sing_p(c);
        let phi = (norm_w_p + self.params.mu * norm_sing_p) / p;
        let j1 = s * self.ints.radial_integral(c, |t| self.f.anti(t), "F(u)")?;
        let j2 = s * self.ints.radial_integral(c, |t| self.g.anti(t), "G(u)")?;
        Ok(EnergyBreakdown {
            phi,
            j1,
            j2,
            e: phi - self.params.lambda * j1 - self.params.gamma * j2,
            norm_w_p,
            norm_sing_p,
        })
    }

    /// `E(u)` alone, skipping terms whose weight is zero.
    pub fn energy_value(&self, c: &[f64]) -> Result<f64> {
        let mut e = self.phi_value(c);
        let s = self.sphere_area;
        if self.params.lambda != 0.0 {
            e -= self.params.lambda * s * self.ints.radial_integral(c, |t| self.f.anti(t), "F(u)")?;
        }
        if self.params.gamma != 0.0 {
            e -= self.params.gamma * s * self.ints.radial_integral(c, |t| self.g.anti(t), "G(u)")?;
        }
        Ok(e)
    }

    pub fn phi_value(&self, c: &[f64]) -> f64 {
        self.sphere_area / self.params.p * (self.ints.grad_p(c) + self.params.mu * self.ints.sing_p(c))
    }

    pub fn j1_value(&self, c: &[f64]) -> Result<f64> {
        Ok(self.sphere_area * self.ints.radial_integral(c, |t| self.f.anti(t), "F(u)")?)
    }

    pub fn gradient(&self, u: &DiscreteFunction) -> Result<GradientVector> {
        self.check(u)?;
        self.gradient_coeffs(u.coeffs())
    }

    pub fn gradient_coeffs(&self, c: &[f64]) -> Result<GradientVector> {
        let phi = self.phi_gradient(c);
        let j1 = self.j1_gradient(c)?;
        let s = self.sphere_area;
        let j2: Vec<f64> = self
            .ints
            .radial_load(c, |t| self.g.eval(t), "g(u)")?
            .into_iter()
            .map(|v| s * v)
            .collect();
        let (lambda, gamma) = (self.params.lambda, self.params.gamma);
        let total = phi
            .iter()
            .zip(&j1)
            .zip(&j2)
            .map(|((a, b), c)| a - lambda * b - gamma * c)
            .collect();
        Ok(GradientVector { total, phi, j1, j2 })
    }

    /// Total residual `E'(u)` only.
    pub fn residual(&self, c: &[f64]) -> Result<Vec<f64>> {
        let mut total = self.phi_gradient(c);
        let s = self.sphere_area;
        if self.params.lambda != 0.0 {
            let l = self.params.lambda * s;
            for (t, v) in total.iter_mut().zip(self.ints.radial_load(c, |t| self.f.eval(t), "f(u)")?) {
                *t -= l * v;
            }
        }
        if self.params.gamma != 0.0 {
            let l = self.params.gamma * s;
            for (t, v) in total.iter_mut().zip(self.ints.radial_load(c, |t| self.g.eval(t), "g(u)")?) {
                *t -= l * v;
            }
        }
        Ok(total)
    }

    pub fn phi_gradient(&self, c: &[f64]) -> Vec<f64> {
        let scale = self.sphere_area / self.params.p;
        let mu = self.params.mu;
        let gw = self.ints.grad_p_gradient(c);
        if mu == 0.0 {
            return gw.into_iter().map(|v| scale * v).collect();
        }
        let gs = self.ints.sing_p_gradient(c);
        gw.iter().zip(&gs).map(|(a, b)| scale * (a + mu * b)).collect()
    }

    pub fn j1_gradient(&self, c: &[f64]) -> Result<Vec<f64>> {
        let s = self.sphere_area;
        Ok(self
            .ints
            .radial_load(c, |t| self.f.eval(t), "f(u)")?
            .into_iter()
            .map(|v| s * v)
            .collect())
    }

    /// Regularized second variation of `Φ` alone; symmetric positive definite
    /// whenever `eps_reg > 0` or `p = 2`.
    pub fn phi_hessian(&self, c: &[f64], eps_reg: f64) -> Tridiagonal {
        let scale = self.sphere_area / self.params.p;
        let mut t = self.ints.grad_p_hessian(c, eps_reg);
        if self.params.mu != 0.0 {
            t.add_scaled(self.params.mu, &self.ints.sing_p_hessian(c, eps_reg));
        }
        for v in t.lower.iter_mut().chain(t.diag.iter_mut()).chain(t.upper.iter_mut()) {
            *v *= scale;
        }
        t
    }

    pub fn newton_matrix(&self, u: &DiscreteFunction, eps_reg: f64) -> Result<Tridiagonal> {
        self.check(u)?;
        self.newton_matrix_coeffs(u.coeffs(), eps_reg)
    }

    /// Tridiagonal second variation of `E` with `|u'|^{p-2}` replaced by
    /// `(u'^2 + eps_reg)^{(p-2)/2}`.
    pub fn newton_matrix_coeffs(&self, c: &[f64], eps_reg: f64) -> Result<Tridiagonal> {
        if self.params.p > 2.0 && !(eps_reg > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eps_reg must be > 0 for p > 2, got {eps_reg}"
            )));
        }
        let mut t = self.phi_hessian(c, eps_reg);
        let s = self.sphere_area;
        if self.params.lambda != 0.0 {
            t.add_scaled(-self.params.lambda * s, &self.ints.radial_hessian(c, |x| self.f.deriv(x)));
        }
        if self.params.gamma != 0.0 {
            t.add_scaled(-self.params.gamma * s, &self.ints.radial_hessian(c, |x| self.g.deriv(x)));
        }
        Ok(t)
    }

    /// `‖u‖_* = (p Φ(u))^{1/p}`.
    pub fn norm_star(&self, u: &DiscreteFunction) -> f64 {
        self.norm_star_coeffs(u.coeffs())
    }

    pub fn norm_star_coeffs(&self, c: &[f64]) -> f64 {
        (self.params.p * self.phi_value(c)).powf(1.0 / self.params.p)
    }

    /// `∫ |∇u|^p dx`.
    pub fn norm_w_p(&self, c: &[f64]) -> f64 {
        self.sphere_area * self.ints.grad_p(c)
    }

    /// `∫ |u|^p / |x|^p dx`.
    pub fn norm_sing_p(&self, c: &[f64]) -> f64 {
        self.sphere_area * self.ints.sing_p(c)
    }

    /// `∫ |u|^p dx`.
    pub fn norm_lp_p(&self, c: &[f64]) -> f64 {
        self.sphere_area * self.ints.lp_p(c)
    }

    /// `L²(Ω)` mass matrix of the free hat functions.
    pub fn mass_matrix(&self) -> Tridiagonal {
        let mut m = self.ints.mass_matrix();
        for v in m.lower.iter_mut().chain(m.diag.iter_mut()).chain(m.upper.iter_mut()) {
            *v *= self.sphere_area;
        }
        m
    }

    /// `∫_Ω φ_i dx` for every free node.
    pub fn mass_vector(&self) -> Vec<f64> {
        self.ints
            .mass_vector()
            .into_iter()
            .map(|v| self.sphere_area * v)
            .collect()
    }
}

/// Energy breakdown of `u` (builds the element tables on the fly).
pub fn energy(u: &DiscreteFunction, params: &EnergyParams, f: &Nonlinearity, g: &Nonlinearity) -> Result<EnergyBreakdown> {
    EnergyFunctional::new(*params, u.grid().clone(), f.clone(), g.clone())?.energy(u)
}

pub fn gradient(u: &DiscreteFunction, params: &EnergyParams, f: &Nonlinearity, g: &Nonlinearity) -> Result<GradientVector> {
    EnergyFunctional::new(*params, u.grid().clone(), f.clone(), g.clone())?.gradient(u)
}

pub fn newton_matrix(
    u: &DiscreteFunction,
    params: &EnergyParams,
    f: &Nonlinearity,
    g: &Nonlinearity,
    eps_reg: f64,
) -> Result<Tridiagonal> {
    EnergyFunctional::new(*params, u.grid().clone(), f.clone(), g.clone())?.newton_matrix(u, eps_reg)
}

/// `(p Φ(u))^{1/p}` for the given parameters.
pub fn norm_star(u: &DiscreteFunction, params: &EnergyParams) -> Result<f64> {
    let ints = PowerIntegrals::new(params, u.grid())?;
    let c = u.coeffs();
    let s = unit_sphere_area(params.n);
    Ok((s * (ints.grad_p(c) + params.mu * ints.sing_p(c))).powf(1.0 / params.p))
}
