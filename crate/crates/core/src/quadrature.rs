//! Weighted integration on radial elements.
//!
//! Bilinear terms against `r^α` use exact element moments. Nonlinear
//! integrands use Gauss rules: Gauss–Legendre on elements away from the
//! origin and Gauss–Jacobi (weight `s^α`) on the element touching `r = 0`, so
//! the weight is integrated exactly there and nothing is evaluated at `r = 0`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::types::{DiscreteFunction, RadialGrid};

/// Gauss points per element used for nonlinear terms.
pub const DEFAULT_ORDER: usize = 5;

/// Quadrature rule on the reference interval `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub order: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Gauss–Legendre rule with `order` points, mapped to `[0, 1]`.
    pub fn gauss_legendre(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Newton iteration on P_n from the Chebyshev-like initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map [-1, 1] -> [0, 1]
            points[i] = 0.5 * (1.0 - x);
            points[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Self {
            order,
            points,
            weights,
        }
    }

    /// Gauss–Jacobi rule for `∫_0^1 s^α φ(s) ds` (Golub–Welsch).
    pub fn gauss_jacobi(order: usize, alpha: f64) -> Result<Self> {
        if !(alpha > -1.0) {
            return Err(Error::InvalidArgument(format!(
                "weight exponent must exceed -1, got {alpha}"
            )));
        }
        let n = order;
        // Monic Jacobi recurrence on [-1, 1] for weight (1 - x)^a (1 + x)^b with a = 0.
        let a = 0.0;
        let b = alpha;
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        for (k, d) in diag.iter_mut().enumerate() {
            let kf = k as f64;
            let s = 2.0 * kf + a + b;
            *d = if k == 0 {
                (b - a) / (a + b + 2.0)
            } else {
                (b * b - a * a) / (s * (s + 2.0))
            };
        }
        for (k, o) in off.iter_mut().enumerate() {
            let kf = (k + 1) as f64;
            let s = 2.0 * kf + a + b;
            let beta = if k == 0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b))
            } else {
                4.0 * kf * (kf + a) * (kf + b) * (kf + a + b) / (s * s * (s + 1.0) * (s - 1.0))
            };
            *o = beta.sqrt();
        }
        let mut jac = DMatrix::zeros(n, n);
        for i in 0..n {
            jac[(i, i)] = diag[i];
            if i + 1 < n {
                jac[(i, i + 1)] = off[i];
                jac[(i + 1, i)] = off[i];
            }
        }
        let eig = SymmetricEigen::new(jac);
        let total = 1.0 / (alpha + 1.0);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let x = eig.eigenvalues[i];
                let v0 = eig.eigenvectors[(0, i)];
                (0.5 * (1.0 + x), total * v0 * v0)
            })
            .collect();
        pairs.sort_by(|l, r| l.0.total_cmp(&r.0));
        Ok(Self {
            order,
            points: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Exact integrals of `r^α φ_i φ_j` and `r^α φ_i` over one element, where
/// `φ_0 = (b - r)/h` and `φ_1 = (r - a)/h` are the two local hat functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMoment {
    pub element: usize,
    pub alpha: f64,
    pub matrix: [[f64; 2]; 2],
    pub vector: [f64; 2],
}

/// Exact weighted moments on element `element` of `grid`.
pub fn moment(grid: &RadialGrid, element: usize, alpha: f64) -> Result<ElementMoment> {
    if element >= grid.elements() {
        return Err(Error::InvalidArgument(format!(
            "element {element} out of range"
        )));
    }
    let (a, b) = grid.element(element);
    let (matrix, vector) = interval_moments(a, b, alpha)?;
    Ok(ElementMoment {
        element,
        alpha,
        matrix,
        vector,
    })
}

/// Moments on an arbitrary interval `[a, b]` with `0 <= a < b`.
pub fn interval_moments(a: f64, b: f64, alpha: f64) -> Result<([[f64; 2]; 2], [f64; 2])> {
    if !(a >= 0.0 && b > a) {
        return Err(Error::InvalidArgument(format!("bad element [{a}, {b}]")));
    }
    let h = b - a;
    if a > 0.0 && h / a <= 0.5 {
        return Ok(series_moments(a, h, alpha));
    }
    if a == 0.0 && !(alpha > -1.0) {
        return Err(Error::InvalidArgument(format!(
            "r^{alpha} is not integrable at the origin"
        )));
    }
    // I_m = ∫_a^b r^{α+m} dr
    let power_integral = |m: f64| -> f64 {
        let k = alpha + m + 1.0;
        if k == 0.0 {
            (b / a).ln()
        } else if a == 0.0 {
            b.powf(k) / k
        } else {
            (b.powf(k) - a.powf(k)) / k
        }
    };
    let i0 = power_integral(0.0);
    let i1 = power_integral(1.0);
    let i2 = power_integral(2.0);
    let h2 = h * h;
    // (b - r)^2, (b - r)(r - a), (r - a)^2 expanded in powers of r
    let m00 = (b * b * i0 - 2.0 * b * i1 + i2) / h2;
    let m01 = (-a * b * i0 + (a + b) * i1 - i2) / h2;
    let m11 = (a * a * i0 - 2.0 * a * i1 + i2) / h2;
    let v0 = (b * i0 - i1) / h;
    let v1 = (i1 - a * i0) / h;
    Ok(([[m00, m01], [m01, m11]], [v0, v1]))
}

/// Binomial expansion of `(a + h s)^α = a^α Σ_k C(α, k) (h/a)^k s^k`, used when
/// `h / a <= 1/2` so the monomial route would cancel catastrophically.
fn series_moments(a: f64, h: f64, alpha: f64) -> ([[f64; 2]; 2], [f64; 2]) {
    let t = h / a;
    let mut coef = 1.0; // C(α, k) t^k
    let mut m = [0.0_f64; 5]; // (1-s)^2, s(1-s), s^2, (1-s), s
    for k in 0..400 {
        let kf = k as f64;
        let terms = [
            2.0 / ((kf + 1.0) * (kf + 2.0) * (kf + 3.0)),
            1.0 / ((kf + 2.0) * (kf + 3.0)),
            1.0 / (kf + 3.0),
            1.0 / ((kf + 1.0) * (kf + 2.0)),
            1.0 / (kf + 2.0),
        ];
        let mut biggest = 0.0_f64;
        for (acc, term) in m.iter_mut().zip(terms) {
            let d = coef * term;
            *acc += d;
            biggest = biggest.max((d / *acc).abs());
        }
        if biggest < 1e-18 || coef == 0.0 {
            break;
        }
        coef *= (alpha - kf) / (kf + 1.0) * t;
    }
    let scale = h * a.powf(alpha);
    let m = m.map(|v| v * scale);
    ([[m[0], m[1]], [m[1], m[2]]], [m[3], m[4]])
}

/// Quadrature points with weights that absorb `h r^α` on one element.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoints {
    pub element: usize,
    pub radius: Vec<f64>,
    pub weight: Vec<f64>,
    /// Local hat values `(φ_0, φ_1)` at each point.
    pub hats: Vec<[f64; 2]>,
}

/// Per-element quadrature tables for `∫ r^α (...) dr` over the whole grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedRule {
    pub alpha: f64,
    pub elements: Vec<WeightedPoints>,
}

impl WeightedRule {
    pub fn new(grid: &RadialGrid, alpha: f64, rule: &QuadratureRule) -> Result<Self> {
        let origin_rule = QuadratureRule::gauss_jacobi(rule.order, alpha)?;
        let elements = (0..grid.elements())
            .map(|e| {
                let (a, b) = grid.element(e);
                let h = b - a;
                let (pts, wts, origin) = if a == 0.0 {
                    (&origin_rule.points, &origin_rule.weights, true)
                } else {
                    (&rule.points, &rule.weights, false)
                };
                let radius: Vec<f64> = pts.iter().map(|s| a + h * s).collect();
                let weight = pts
                    .iter()
                    .zip(wts)
                    .zip(&radius)
                    .map(|((_, w), r)| {
                        if origin {
                            w * h.powf(alpha + 1.0)
                        } else {
                            w * h * r.powf(alpha)
                        }
                    })
                    .collect();
                let hats = pts.iter().map(|s| [1.0 - s, *s]).collect();
                WeightedPoints {
                    element: e,
                    radius,
                    weight,
                    hats,
                }
            })
            .collect();
        Ok(Self { alpha, elements })
    }
}

/// `Σ_e ∫_e r^α integrand(r, u(r)) dr` with `rule` (Gauss–Jacobi on the origin element).
pub fn integrate_nonlinear(
    grid: &RadialGrid,
    alpha: f64,
    integrand: impl Fn(f64, f64) -> f64,
    u: &DiscreteFunction,
    rule: &QuadratureRule,
) -> Result<f64> {
    if u.grid().nodes() != grid.nodes() {
        return Err(Error::InvalidArgument("function lives on another grid".into()));
    }
    let table = WeightedRule::new(grid, alpha, rule)?;
    let mut total = 0.0;
    for el in &table.elements {
        let (u0, u1) = (u.node_value(el.element), u.node_value(el.element + 1));
        for ((r, w), hat) in el.radius.iter().zip(&el.weight).zip(&el.hats) {
            let s = hat[0] * u0 + hat[1] * u1;
            let v = integrand(*r, s);
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    what: "integrand".into(),
                    radius: *r,
                });
            }
            total += w * v;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::make_grid;
    use std::sync::Arc;

    #[test]
    fn legendre_five_points() {
        let rule = QuadratureRule::gauss_legendre(5);
        let sum: f64 = rule.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
        // exact for degree 9
        let approx: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x.powi(9))
            .sum();
        assert!((approx - 0.1).abs() < 1e-15);
        assert!(rule.points.iter().all(|&x| x > 0.0 && x < 1.0));
        assert!(rule.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn jacobi_integrates_weighted_monomials() {
        for &alpha in &[-0.5, 0.0, 0.5, 2.0] {
            let rule = QuadratureRule::gauss_jacobi(5, alpha).unwrap();
            for k in 0..10 {
                let approx: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * x.powi(k))
                    .sum();
                let exact = 1.0 / (alpha + k as f64 + 1.0);
                assert!((approx - exact).abs() < 1e-13 * exact, "alpha {alpha} k {k}");
            }
            assert!(rule.points.iter().all(|&x| x > 0.0 && x < 1.0));
        }
        assert!(QuadratureRule::gauss_jacobi(5, -1.0).is_err());
    }

    #[test]
    fn unit_element_moments() {
        let grid = make_grid(2, 1.0, 2.0).unwrap();
        let m = moment(&grid, 0, 0.0).unwrap();
        assert!((m.matrix[0][0] - 1.0 / 3.0).abs() < 1e-15);
        let m = moment(&grid, 0, 2.0).unwrap();
        assert!((m.matrix[1][1] - 0.2).abs() < 1e-15);
        assert_eq!(m.matrix[0][1], m.matrix[1][0]);
        assert!(moment(&grid, 2, 0.0).is_err());
        assert!(interval_moments(0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn series_and_monomial_routes_agree_at_the_switch() {
        for &alpha in &[0.0, 0.5, 2.0, -0.5] {
            let (a, h) = (2.0, 1.0);
            let s = series_moments(a, h, alpha);
            // force the monomial route on the same interval
            let b = a + h;
            let k = |m: f64| alpha + m + 1.0;
            let i = |m: f64| (b.powf(k(m)) - a.powf(k(m))) / k(m);
            let m00 = (b * b * i(0.0) - 2.0 * b * i(1.0) + i(2.0)) / (h * h);
            assert!((s.0[0][0] - m00).abs() < 1e-13 * m00);
        }
    }

    #[test]
    fn piecewise_linear_integrals() {
        let grid = Arc::new(make_grid(2, 1.0, 1.0).unwrap());
        let rule = QuadratureRule::gauss_legendre(DEFAULT_ORDER);
        let u = DiscreteFunction::from_fn(grid.clone(), |r| 1.0 - r);
        let v = integrate_nonlinear(&grid, 2.0, |_, s| s * s, &u, &rule).unwrap();
        assert!((v - 1.0 / 30.0).abs() < 1e-12);
        let zero = DiscreteFunction::zeros(grid.clone());
        assert_eq!(integrate_nonlinear(&grid, 2.0, |_, s| s, &zero, &rule).unwrap(), 0.0);
        let len = integrate_nonlinear(&grid, 0.0, |_, _| 1.0, &u, &rule).unwrap();
        assert!((len - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_finite_integrand_names_radius() {
        let grid = Arc::new(make_grid(4, 1.0, 1.0).unwrap());
        let rule = QuadratureRule::gauss_legendre(DEFAULT_ORDER);
        let u = DiscreteFunction::zeros(grid.clone());
        let err = integrate_nonlinear(&grid, 0.0, |r, _| if r > 0.5 { f64::NAN } else { 0.0 }, &u, &rule)
            .unwrap_err();
        match err {
            Error::Evaluation { radius, .. } => assert!(radius > 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }
}
