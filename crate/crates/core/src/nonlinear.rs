//! Forcing and disturbance nonlinearities `f`, `g` with their primitives
//! `F(t) = ∫_0^t f`, `G(t) = ∫_0^t g`, and numeric audits of the growth
//! conditions placed on them.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Role of a nonlinearity in the energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// `f`, weighted by `λ`.
    Forcing,
    /// `g`, weighted by `γ`.
    Disturbance,
}

/// Declared growth bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Growth {
    /// `|f(t)| <= c_f |t|^{p-1}`.
    Forcing { c_f: f64 },
    /// `|g(t)| <= c_g (1 + |t|^{q-1})`.
    Disturbance { c_g: f64, q: f64 },
}

/// An evaluable nonlinearity together with its primitive and derivative.
#[derive(Clone)]
pub struct Nonlinearity {
    name: String,
    kind: Kind,
    growth: Growth,
    eval: ScalarFn,
    anti: ScalarFn,
    deriv: ScalarFn,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("growth", &self.growth)
            .finish()
    }
}

impl Nonlinearity {
    /// Builds a nonlinearity from `t ↦ f(t)` and its primitive. The derivative
    /// defaults to a centered difference of `eval`.
    pub fn new<E, A>(name: impl Into<String>, kind: Kind, growth: Growth, eval: E, anti: A) -> Self
    where
        E: Fn(f64) -> f64 + Send + Sync + 'static,
        A: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let eval: ScalarFn = Arc::new(eval);
        let e = eval.clone();
        let deriv: ScalarFn = Arc::new(move |t: f64| {
            let h = 1e-6 * (1.0 + t.abs());
            (e(t + h) - e(t - h)) / (2.0 * h)
        });
        Self {
            name: name.into(),
            kind,
            growth,
            eval,
            anti: Arc::new(anti),
            deriv,
        }
    }

    pub fn with_derivative<D>(mut self, deriv: D) -> Self
    where
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.deriv = Arc::new(deriv);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn growth(&self) -> Growth {
        self.growth
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn anti(&self, t: f64) -> f64 {
        (self.anti)(t)
    }

    pub fn deriv(&self, t: f64) -> f64 {
        (self.deriv)(t)
    }

    /// Looks a nonlinearity up by its command-line name: `example_f`,
    /// `example_g`, `zero` or `power:<k>`.
    pub fn by_name(name: &str, kind: Kind, example: &ExampleParams, p: f64) -> Result<Self> {
        match name {
            "example_f" => example_f(example, p),
            "example_g" => example_g(example),
            "zero" => Ok(zero(kind)),
            other => match other.strip_prefix("power:") {
                Some(k) => {
                    let k: f64 = k.parse().map_err(|_| {
                        Error::InvalidArgument(format!("bad exponent in {other:?}"))
                    })?;
                    power(k, kind)
                }
                None => Err(Error::InvalidArgument(format!(
                    "unknown nonlinearity {other:?}"
                ))),
            },
        }
    }
}

/// Parameters of the built-in example pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleParams {
    /// Frequency `r > 0` of the example `f`.
    pub r_ex: f64,
    /// Crossover `z > 0` of the example `g`.
    pub z: f64,
    /// Growth exponent of the example `g`, `1 < q < pn/(n-p)`.
    pub q: f64,
}

impl ExampleParams {
    /// Validates `r_ex, z > 0` and `1 < q < pn/(n - p)`.
    pub fn new(r_ex: f64, z: f64, q: f64, p: f64, n: u32) -> Result<Self> {
        if !(r_ex.is_finite() && r_ex > 0.0) {
            return Err(Error::InvalidArgument(format!("r_ex must be > 0, got {r_ex}")));
        }
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::InvalidArgument(format!("z must be > 0, got {z}")));
        }
        let nf = f64::from(n);
        let q_max = if p < nf { p * nf / (nf - p) } else { f64::INFINITY };
        if !(q > 1.0 && q < q_max) {
            return Err(Error::InvalidArgument(format!(
                "q must lie in (1, {q_max}), got {q}"
            )));
        }
        Ok(Self { r_ex, z, q })
    }
}

impl Default for ExampleParams {
    fn default() -> Self {
        Self {
            r_ex: 1.0,
            z: 1.0,
            q: 2.0,
        }
    }
}

/// Number of uniform panels cached between the origin and each joint.
const INNER_PANELS: usize = 64;
/// Ratio of consecutive panel endpoints beyond the last joint.
const TAIL_RATIO: f64 = 1.25;
/// Points per panel.
const PANEL_ORDER: usize = 16;

/// Cached primitive `x ↦ ∫_0^x h(s) ds` for `x >= 0`, with `h` smooth between
/// the declared joints.
struct PanelPrimitive {
    integrand: ScalarFn,
    breaks: Vec<f64>,
    cumulative: Vec<f64>,
    rule: QuadratureRule,
}

impl PanelPrimitive {
    fn new(integrand: ScalarFn, joints: &[f64]) -> Self {
        let rule = QuadratureRule::gauss_legendre(PANEL_ORDER);
        let mut breaks = vec![0.0];
        let mut last = 0.0;
        for &j in joints {
            for k in 1..=INNER_PANELS {
                breaks.push(last + (j - last) * k as f64 / INNER_PANELS as f64);
            }
            last = j;
        }
        if last == 0.0 {
            for k in 1..=INNER_PANELS {
                breaks.push(k as f64 / INNER_PANELS as f64);
            }
            last = 1.0;
        }
        let end = last * 1e9;
        let mut x = last;
        while x < end {
            x *= TAIL_RATIO;
            breaks.push(x);
        }
        let mut cumulative = Vec::with_capacity(breaks.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in breaks.windows(2) {
            acc += gauss_panel(&rule, &*integrand, w[0], w[1]);
            cumulative.push(acc);
        }
        Self {
            integrand,
            breaks,
            cumulative,
            rule,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        let k = self.breaks.partition_point(|&b| b <= x) - 1;
        if k + 1 < self.breaks.len() {
            return self.cumulative[k] + gauss_panel(&self.rule, &*self.integrand, self.breaks[k], x);
        }
        let mut acc = self.cumulative[k];
        let mut lo = self.breaks[k];
        while lo < x {
            let hi = (lo * TAIL_RATIO).min(x);
            acc += gauss_panel(&self.rule, &*self.integrand, lo, hi);
            lo = hi;
        }
        acc
    }
}

fn gauss_panel(rule: &QuadratureRule, h: &(dyn Fn(f64) -> f64 + Send + Sync), a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let len = b - a;
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(s, w)| w * h(a + len * s))
        .sum::<f64>()
        * len
}

/// `∫_0^x sin^2(θ) dθ`, with a series near zero to avoid cancellation.
fn sin_squared_primitive(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let x2 = x * x;
        x * x2
            * (1.0 / 3.0
                + x2 * (-1.0 / 15.0 + x2 * (2.0 / 315.0 + x2 * (-1.0 / 2835.0 + x2 * (2.0 / 155_925.0)))))
    } else {
        0.5 * x - 0.25 * (2.0 * x).sin()
    }
}

/// Largest value of `φ` on `[lo, hi]` by a dense scan refined with golden sections.
fn maximize_scalar(phi: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = 2000;
    let step = (hi - lo) / n as f64;
    let (mut best_x, mut best) = (hi, phi(hi));
    for i in 0..n {
        let x = lo + step * (i as f64 + 0.5);
        let v = phi(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let (mut a, mut b) = ((best_x - step).max(lo), (best_x + step).min(hi));
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if phi(c) > phi(d) {
            b = d;
        } else {
            a = c;
        }
        if b - a < 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    best.max(phi(0.5 * (a + b)))
}

/// The example forcing term with frequency `r`:
/// `f(t) = (π/2r)^{p-1} |sin(rt)|^p` for `|t| <= π/2r` and
/// `(1 + (π/2r)^2) |t|^{p-1} / (1 + t^2)` beyond.
pub fn example_f(params: &ExampleParams, p: f64) -> Result<Nonlinearity> {
    if !(p >= 2.0) {
        return Err(Error::InvalidArgument(format!("need p >= 2, got {p}")));
    }
    let r = params.r_ex;
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("r_ex must be > 0, got {r}")));
    }
    let a = PI / (2.0 * r);
    let lead = a.powf(p - 1.0);
    let tail = 1.0 + a * a;
    let inner_f = move |t: f64| lead * (r * t).sin().abs().powf(p);
    let tail_f = move |t: f64| tail * t.abs().powf(p - 1.0) / (1.0 + t * t);
    let (fi, ft) = (inner_f(a), tail_f(a));
    if (fi - ft).abs() > 1e-12 * fi.abs().max(1.0) {
        return Err(Error::Construction(format!(
            "example f branches disagree at the joint: {fi} vs {ft}"
        )));
    }
    let eval = move |t: f64| if t.abs() <= a { inner_f(t) } else { tail_f(t) };

    let anti: ScalarFn = if p == 2.0 {
        let f_joint = lead * sin_squared_primitive(r * a) / r;
        Arc::new(move |t: f64| {
            let x = t.abs();
            let v = if x <= a {
                lead * sin_squared_primitive(r * x) / r
            } else {
                f_joint + 0.5 * tail * ((1.0 + x * x) / (1.0 + a * a)).ln()
            };
            v.copysign(t)
        })
    } else {
        let primitive = PanelPrimitive::new(Arc::new(eval), &[a]);
        // f is even, so F is odd
        Arc::new(move |t: f64| primitive.eval(t.abs()).copysign(t))
    };

    let deriv = move |t: f64| {
        let x = t.abs();
        let sign = t.signum();
        if x <= a {
            let s = (r * x).sin();
            sign * lead * p * s.abs().powf(p - 1.0) * (r * x).cos() * r
        } else {
            let d = ((p - 1.0) * x.powf(p - 2.0) * (1.0 + x * x) - 2.0 * x * x.powf(p - 1.0))
                / (1.0 + x * x).powi(2);
            sign * tail * d
        }
    };

    // sup |f(t)| / |t|^{p-1}: the tail ratio (1 + a^2)/(1 + t^2) is at most 1 and
    // the inner ratio is (π/2)^{p-1} sin^p θ / θ^{p-1} with θ = rt.
    let half_pi = 0.5 * PI;
    let inner_max = maximize_scalar(
        |th: f64| half_pi.powf(p - 1.0) * th.sin().powf(p) / th.powf(p - 1.0),
        1e-9,
        half_pi,
    );
    let c_f = inner_max.max(1.0);

    let anti_fn = anti.clone();
    let mut nl = Nonlinearity::new(
        "example_f",
        Kind::Forcing,
        Growth::Forcing { c_f },
        eval,
        move |t| anti_fn(t),
    );
    nl = nl.with_derivative(deriv);
    Ok(nl)
}

/// The example disturbance with crossover `z`:
/// `g(t) = 1 + |t|^{q-1}` for `|t| <= z` and
/// `(1 + z^2)(1 + z^{q-1}) / (1 + t^2)` beyond. `G` is odd.
pub fn example_g(params: &ExampleParams) -> Result<Nonlinearity> {
    let (z, q) = (params.z, params.q);
    if !(z > 0.0) {
        return Err(Error::InvalidArgument(format!("z must be > 0, got {z}")));
    }
    if !(q > 1.0) {
        return Err(Error::InvalidArgument(format!("q must exceed 1, got {q}")));
    }
    let c = (1.0 + z * z) * (1.0 + z.powf(q - 1.0));
    let inner = move |t: f64| 1.0 + t.abs().powf(q - 1.0);
    let outer = move |t: f64| c / (1.0 + t * t);
    let (gi, go) = (inner(z), outer(z));
    if (gi - go).abs() > 1e-12 * gi.abs().max(1.0) {
        return Err(Error::Construction(format!(
            "example g branches disagree at the joint: {gi} vs {go}"
        )));
    }
    let eval = move |t: f64| if t.abs() <= z { inner(t) } else { outer(t) };
    let g_joint = z + z.powf(q) / q;
    let anti = move |t: f64| {
        let x = t.abs();
        let v = if x <= z {
            x + x.powf(q) / q
        } else {
            g_joint + c * (x.atan() - z.atan())
        };
        v.copysign(t)
    };
    // At t = 0 the inner derivative is taken as 0 (for q < 2 it is unbounded).
    let deriv = move |t: f64| {
        let x = t.abs();
        if x == 0.0 {
            0.0
        } else if x <= z {
            t.signum() * (q - 1.0) * x.powf(q - 2.0)
        } else {
            -2.0 * t * c / (1.0 + t * t).powi(2)
        }
    };
    Ok(
        Nonlinearity::new("example_g", Kind::Disturbance, Growth::Disturbance { c_g: 1.0, q }, eval, anti)
            .with_derivative(deriv),
    )
}

/// `f ≡ 0`.
pub fn zero(kind: Kind) -> Nonlinearity {
    let growth = match kind {
        Kind::Forcing => Growth::Forcing { c_f: 0.0 },
        Kind::Disturbance => Growth::Disturbance { c_g: 0.0, q: 2.0 },
    };
    Nonlinearity::new("zero", kind, growth, |_| 0.0, |_| 0.0).with_derivative(|_| 0.0)
}

/// `f(t) = |t|^{k-2} t` with `F(t) = |t|^k / k`.
pub fn power(k: f64, kind: Kind) -> Result<Nonlinearity> {
    if !(k > 1.0 && k.is_finite()) {
        return Err(Error::InvalidArgument(format!("power exponent must exceed 1, got {k}")));
    }
    let growth = match kind {
        Kind::Forcing => Growth::Forcing { c_f: 1.0 },
        Kind::Disturbance => Growth::Disturbance { c_g: 1.0, q: k },
    };
    Ok(Nonlinearity::new(
        format!("power:{k}"),
        kind,
        growth,
        move |t| t.abs().powf(k - 2.0) * t,
        move |t| t.abs().powf(k) / k,
    )
    .with_derivative(move |t| {
        if t == 0.0 && k < 2.0 {
            0.0
        } else {
            (k - 1.0) * t.abs().powf(k - 2.0)
        }
    }))
}

/// Sample table of a limit audit: `(t, f(t) / |t|^{p-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitReport {
    pub passes: bool,
    pub samples: Vec<(f64, f64)>,
}

/// Ratio threshold at the last sampled decade.
pub const LIMIT_THRESHOLD: f64 = 1e-3;

fn require_kind(nl: &Nonlinearity, kind: Kind) -> Result<()> {
    if nl.kind() != kind {
        return Err(Error::InvalidArgument(format!(
            "{} is a {:?} term, expected {:?}",
            nl.name(),
            nl.kind(),
            kind
        )));
    }
    Ok(())
}

fn limit_audit(nl: &Nonlinearity, p: f64, exponent_sign: f64) -> LimitReport {
    let mut samples = Vec::new();
    let mut magnitude = Vec::new();
    for k in 1..=8 {
        let t = 10f64.powf(exponent_sign * k as f64);
        let mut m = 0.0_f64;
        for s in [t, -t] {
            let ratio = nl.eval(s) / s.abs().powf(p - 1.0);
            samples.push((s, ratio));
            m = if ratio.is_finite() { m.max(ratio.abs()) } else { f64::INFINITY };
        }
        magnitude.push(m);
    }
    // non-increasing over the last four decades, small at the end
    let tail = &magnitude[3..];
    let decreasing = tail.windows(2).all(|w| w[1] <= w[0]);
    let last = magnitude[magnitude.len() - 1];
    LimitReport {
        passes: decreasing && last < LIMIT_THRESHOLD,
        samples,
    }
}

/// Audits `f(t)/|t|^{p-1} → 0` as `|t| → 0` on `t = ±10^{-k}`, `k = 1..8`.
pub fn check_f1(nl: &Nonlinearity, p: f64) -> Result<LimitReport> {
    require_kind(nl, Kind::Forcing)?;
    Ok(limit_audit(nl, p, -1.0))
}

/// Audits `f(t)/|t|^{p-1} → 0` as `|t| → ∞` on `t = ±10^{k}`, `k = 1..8`.
pub fn check_f2(nl: &Nonlinearity, p: f64) -> Result<LimitReport> {
    require_kind(nl, Kind::Forcing)?;
    Ok(limit_audit(nl, p, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupReport {
    pub passes: bool,
    pub t_star: f64,
    pub f_value: f64,
}

/// Points per sign in the `sup F > 0` scan.
pub const F3_POINTS: usize = 401;

/// Scans `F` on `±[1e-3, 1e3]` (log-spaced) and reports its largest value.
pub fn check_f3(nl: &Nonlinearity) -> Result<SupReport> {
    require_kind(nl, Kind::Forcing)?;
    let (mut t_star, mut best) = (0.0, f64::NEG_INFINITY);
    for i in 0..F3_POINTS {
        let t = 10f64.powf(-3.0 + 6.0 * i as f64 / (F3_POINTS - 1) as f64);
        for s in [t, -t] {
            let v = nl.anti(s);
            if v > best {
                best = v;
                t_star = s;
            }
        }
    }
    Ok(SupReport {
        passes: best > 0.0,
        t_star,
        f_value: best,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthReport {
    pub passes: bool,
    pub fitted_c_g: f64,
    pub declared_c_g: f64,
    pub q: f64,
}

/// Samples `|g(t)| / (1 + |t|^{q-1})` on `t = 0` and `±[1e-6, 1e4]` (log grid)
/// and compares the observed supremum with the declared `c_g`.
pub fn check_g1(nl: &Nonlinearity) -> Result<GrowthReport> {
    require_kind(nl, Kind::Disturbance)?;
    let Growth::Disturbance { c_g, q } = nl.growth() else {
        return Err(Error::InvalidArgument("disturbance without (c_g, q)".into()));
    };
    let ratio = |t: f64| nl.eval(t).abs() / (1.0 + t.abs().powf(q - 1.0));
    let mut sup = ratio(0.0);
    let points = 2001;
    for i in 0..points {
        let t = 10f64.powf(-6.0 + 10.0 * i as f64 / (points - 1) as f64);
        for s in [t, -t] {
            let v = ratio(s);
            sup = if v.is_finite() { sup.max(v) } else { f64::INFINITY };
        }
    }
    Ok(GrowthReport {
        passes: sup.is_finite() && sup <= c_g * (1.0 + 1e-9),
        fitted_c_g: sup,
        declared_c_g: c_g,
        q,
    })
}
