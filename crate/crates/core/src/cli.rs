//! Command-line front end: configuration, the `verify`, `solve`, `sweep`,
//! `beta` and `energy` commands, and CSV output.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or configuration
//! error, 3 solver non-convergence.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{self, AuditRecord};
use crate::error::Error;
use crate::functionals::EnergyFunctional;
use crate::linalg::norm2;
use crate::nonlinear::{ExampleParams, Kind, Nonlinearity};
use crate::rng::{random_smooth, SampleStream};
use crate::solver::{self, SolveConfig, SolveReport};
use crate::types::{derived_constants, make_grid, EnergyParams, DEFAULT_ELEMENTS, DEFAULT_GRADING};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

/// Failure of a command, carrying its exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Verification(String),
    NonConvergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Verification(_) => EXIT_VERIFY,
            CliError::NonConvergence(_) => EXIT_NONCONVERGENCE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::NonConvergence(m) => write!(f, "no convergence: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            Error::NoPositiveRatio => CliError::Verification(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Everything a command needs; filled from defaults, then a config file, then flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub p: f64,
    pub n: u32,
    pub mu: f64,
    pub r_omega: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub f: String,
    pub g: String,
    pub r_ex: f64,
    pub z: f64,
    pub q: f64,
    pub elements: usize,
    pub grading: f64,
    pub solve: SolveConfig,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            n: 3,
            mu: 0.1,
            r_omega: 1.0,
            lambda: 0.0,
            gamma: 0.0,
            f: "example_f".into(),
            g: "example_g".into(),
            r_ex: 1.0,
            z: 1.0,
            q: 2.0,
            elements: DEFAULT_ELEMENTS,
            grading: DEFAULT_GRADING,
            solve: SolveConfig::default(),
            out: PathBuf::from("."),
            seed: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("cannot parse {key} = {value:?}")))
}

impl RunConfig {
    /// Sets one `key = value` entry.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let s = &mut self.solve;
        match key {
            "p" => self.p = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "mu" => self.mu = parse(key, value)?,
            "r_omega" => self.r_omega = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "f" => self.f = value.to_string(),
            "g" => self.g = value.to_string(),
            "r_ex" => self.r_ex = parse(key, value)?,
            "z" => self.z = parse(key, value)?,
            "q" => self.q = parse(key, value)?,
            "elements" => self.elements = parse(key, value)?,
            "grading" => self.grading = parse(key, value)?,
            "tol" => s.tol = parse(key, value)?,
            "max_descent_iter" => s.max_descent_iter = parse(key, value)?,
            "max_newton_iter" => s.max_newton_iter = parse(key, value)?,
            "eps_reg" => s.eps_reg = parse(key, value)?,
            "backtracking" => s.backtracking = parse(key, value)?,
            "armijo" => s.armijo = parse(key, value)?,
            "enforce_conditions" => s.enforce_conditions = parse(key, value)?,
            "dist_factor" => s.dist_factor = parse(key, value)?,
            "random_starts" => s.starts.random = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a line-based `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {}: expected key = value", no + 1)));
            };
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Validates every field and builds the energy functional.
    pub fn build(&self) -> CliResult<EnergyFunctional> {
        let params = EnergyParams::new(self.p, self.n, self.mu, self.lambda, self.gamma, self.r_omega)?;
        let example = ExampleParams::new(self.r_ex, self.z, self.q, self.p, self.n)?;
        self.solve.validate()?;
        let grid = Arc::new(make_grid(self.elements, self.grading, self.r_omega)?);
        let f = Nonlinearity::by_name(&self.f, Kind::Forcing, &example, self.p)?;
        let g = Nonlinearity::by_name(&self.g, Kind::Disturbance, &example, self.p)?;
        Ok(EnergyFunctional::new(params, grid, f, g)?)
    }

    fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            seed: self.seed,
            ..self.solve.clone()
        }
    }
}

/// 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(dir: &Path, name: &str, body: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn profile_csv(u: &crate::types::DiscreteFunction) -> String {
    let mut s = String::from("r,u\n");
    for (r, v) in u.profile() {
        let _ = writeln!(s, "{},{}", fmt_num(r), fmt_num(v));
    }
    s
}

/// Sample budgets of the verification battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuditBudget {
    pub hardy: usize,
    pub poincare: usize,
    pub chabrowski: usize,
    pub monotonicity: usize,
    pub gradient: usize,
    pub norm_axioms: usize,
    pub convexity: usize,
    pub ratio_directions: usize,
    pub inverse: usize,
}

impl Default for AuditBudget {
    fn default() -> Self {
        Self {
            hardy: 1000,
            poincare: 1000,
            chabrowski: 100_000,
            monotonicity: 200,
            gradient: 50,
            norm_axioms: 1000,
            convexity: 200,
            ratio_directions: 20,
            inverse: 20,
        }
    }
}

/// Inversion audit: `(Φ')^{-1}(Φ'(u))` against `u` in `‖·‖_*`, relative to `max(1, ‖u‖_*)`.
pub fn inverse_audit(functional: &EnergyFunctional, config: &SolveConfig, samples: usize, seed: u64) -> CliResult<AuditRecord> {
    let stream = SampleStream::new(seed).fork(0x1a7e);
    let mut margins = Vec::with_capacity(samples);
    for k in 0..samples {
        let mut rng = stream.rng(k as u64);
        let u = random_smooth(functional.grid(), &mut rng, 1.0 + k as f64 % 5.0);
        let w = functional.phi_gradient(u.coeffs());
        let margin = match solver::invert_phi_prime(&w, functional, config) {
            Ok(v) => 1e-5 - functional.norm_star(&(&v - &u)) / functional.norm_star(&u).max(1.0),
            Err(_) => f64::NEG_INFINITY,
        };
        margins.push(margin);
    }
    let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let mut rec = AuditRecord::single("phi_prime_inverse", worst, margins.iter().all(|m| *m >= 0.0));
    rec.samples = samples;
    Ok(rec)
}

/// Runs the full battery and returns one record per check.
pub fn verify_records(cfg: &RunConfig, budget: &AuditBudget) -> CliResult<Vec<AuditRecord>> {
    let functional = cfg.build()?;
    let params = *functional.params();
    let stream = SampleStream::new(cfg.seed);
    let constants = derived_constants(&params, functional.grid())?;
    let mut records = analysis::nonlinearity_audit(functional.f(), functional.g(), params.p)?;
    records.push(analysis::hardy_audit(&functional, budget.hardy, stream));
    records.push(analysis::poincare_audit(&functional, constants.poincare_c, budget.poincare, stream));
    for p in [2.0, 3.0, 4.0] {
        records.push(analysis::chabrowski_audit(p, params.n as usize, budget.chabrowski, stream));
    }
    records.push(analysis::monotonicity_audit(&functional, budget.monotonicity, stream)?);
    records.push(analysis::gradient_audit(&functional, budget.gradient, stream)?);
    records.extend(analysis::norm_axiom_audit(&functional, budget.norm_axioms, stream));
    for eps in [0.1, 0.5, 1.0] {
        records.push(analysis::convexity_audit(&functional, eps, budget.convexity, stream)?);
    }
    records.extend(analysis::ratio_limit_audit(&functional, budget.ratio_directions, stream)?);

    let solve_cfg = cfg.solve_config();
    match solver::estimate_beta(&functional, &solve_cfg) {
        Ok(beta) => {
            records.push(AuditRecord::single("beta_positive", beta.beta_hat, beta.beta_hat > 0.0));
            let cond = beta.bump.conditions();
            records.push(AuditRecord::single("bump_conditions", 0.0, cond.all()));
            let vb = analysis::volume_bookkeeping(&beta.bump, &functional)?;
            records.push(AuditRecord::single(
                "volume_bookkeeping",
                vb.j1 - vb.bound_annulus,
                vb.passes_annulus,
            ));
            let mut literal = AuditRecord::single(
                "volume_bookkeeping_literal_bracket",
                vb.j1 - vb.bound_literal,
                vb.passes_literal,
            );
            literal.gating = false;
            records.push(literal);
        }
        Err(e) => {
            let mut r = AuditRecord::single("beta_positive", 0.0, false);
            r.witness = Some(e.to_string());
            records.push(r);
        }
    }
    records.push(inverse_audit(&functional, &solve_cfg, budget.inverse, cfg.seed)?);

    // invariants of the assembly
    let zero = functional.zero();
    let at_zero = functional.energy(&zero)?;
    records.push(AuditRecord::single(
        "energy_at_zero",
        -at_zero.e.abs(),
        at_zero.phi == 0.0 && at_zero.j1 == 0.0 && at_zero.j2 == 0.0,
    ));
    let g0 = functional.gradient(&zero)?;
    let expect: Vec<f64> = functional.mass_vector().iter().map(|m| -params.gamma * m).collect();
    let dev = g0.total.iter().zip(&expect).map(|(a, b)| (a - b).abs()).fold(0.0_f64, f64::max);
    let scale = norm2(&expect).max(1.0);
    records.push(AuditRecord::single("gradient_at_zero", -dev / scale, dev <= 1e-14 * scale));
    let u = random_smooth(functional.grid(), &mut stream.fork(0x2b).rng(0), 1.0);
    let k = functional.newton_matrix(&u, solve_cfg.eps_reg.max(1e-12))?;
    records.push(AuditRecord::single("newton_matrix_symmetric", 0.0, k.is_symmetric()));
    Ok(records)
}

pub fn verify_csv(records: &[AuditRecord]) -> String {
    let mut s = String::from("name,samples,worst_margin,pass\n");
    for r in records {
        let pass = match (r.gating, r.passes) {
            (false, true) => "info-pass",
            (false, false) => "info-fail",
            (true, true) => "pass",
            (true, false) => "fail",
        };
        let _ = writeln!(s, "{},{},{},{}", r.name, r.samples, fmt_num(r.worst_margin), pass);
    }
    s
}

pub fn cmd_verify(cfg: &RunConfig) -> CliResult<Vec<AuditRecord>> {
    let records = verify_records(cfg, &AuditBudget::default())?;
    write_file(&cfg.out, "verify.csv", &verify_csv(&records))?;
    for r in &records {
        let status = if r.passes { "PASS" } else { "FAIL" };
        let tag = if r.gating { "" } else { " (informational)" };
        println!("{status} {}{tag}: samples {}, worst margin {:e}", r.name, r.samples, r.worst_margin);
        if let Some(w) = &r.witness {
            println!("     witness: {w}");
        }
    }
    let failed: Vec<&str> = records
        .iter()
        .filter(|r| r.gating && !r.passes)
        .map(|r| r.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(records)
    } else {
        Err(CliError::Verification(failed.join(", ")))
    }
}

fn solutions_csv(report: &SolveReport) -> String {
    let mut s = String::from("cluster,start,lambda,gamma,energy,phi,j1,j2,norm_star,residual,iterations,trivial\n");
    for (k, c) in report.clusters.iter().enumerate() {
        let sol = &report.solutions[c.representative];
        let _ = writeln!(
            s,
            "{k},{},{},{},{},{},{},{},{},{},{},{}",
            sol.start.replace(',', ";"),
            fmt_num(report.lambda),
            fmt_num(report.gamma),
            fmt_num(sol.energy.e),
            fmt_num(sol.energy.phi),
            fmt_num(sol.energy.j1),
            fmt_num(sol.energy.j2),
            fmt_num(sol.norm_star),
            fmt_num(sol.residual),
            sol.iterations,
            c.trivial
        );
    }
    s
}

pub fn cmd_solve(cfg: &RunConfig) -> CliResult<SolveReport> {
    let functional = cfg.build()?;
    let mut report = solver::find_critical_points(&functional, &cfg.solve_config())?;
    report.beta_hat = solver::estimate_beta(&functional, &cfg.solve_config()).ok().map(|b| b.beta_hat);
    write_file(&cfg.out, "solutions.csv", &solutions_csv(&report))?;
    for (k, sol) in report.representatives().enumerate() {
        write_file(&cfg.out, &format!("profile_{k}.csv"), &profile_csv(&sol.function))?;
    }
    println!(
        "lambda {} gamma {}: {} distinct critical points ({} nontrivial), max norm {:e}, {} failed starts",
        report.lambda,
        report.gamma,
        report.distinct,
        report.nontrivial,
        report.max_norm,
        report.failures.len()
    );
    if let Some(b) = report.beta_hat {
        println!("beta_hat {b:e}, lambda threshold 1/beta_hat = {:e}", 1.0 / b);
    }
    if report.solutions.is_empty() {
        return Err(CliError::NonConvergence("no start converged".into()));
    }
    Ok(report)
}

/// Parses `a:b:n` (linear), a comma list, or `beta:a:b:n` (multiples of `1/β̂`).
pub fn parse_grid_spec(spec: &str, beta_hat: impl FnOnce() -> CliResult<f64>) -> CliResult<Vec<f64>> {
    let bad = || CliError::Config(format!("invalid grid spec {spec:?}"));
    let linspace = |parts: &[&str]| -> CliResult<Vec<f64>> {
        let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        match n {
            0 => Err(bad()),
            1 => Ok(vec![a]),
            _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
        }
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        ["beta", rest @ ..] if rest.len() == 3 => {
            let scale = 1.0 / beta_hat()?;
            linspace(rest)?.into_iter().map(|v| v * scale).collect()
        }
        [_, _, _] => linspace(&parts)?,
        [single] => single
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<CliResult<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(bad());
    }
    Ok(values)
}

pub fn sweep_csv(table: &solver::SweepTable) -> String {
    let mut s = String::from("lambda,gamma,distinct,nontrivial,max_norm,min_residual,converged,uniform_bound,error\n");
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            fmt_num(r.lambda),
            fmt_num(r.gamma),
            r.distinct,
            r.nontrivial,
            fmt_num(r.max_norm),
            fmt_num(r.min_residual),
            r.converged,
            fmt_num(table.uniform_bound),
            r.error.as_deref().unwrap_or("").replace(',', ";")
        );
    }
    s
}

pub fn cmd_sweep(cfg: &RunConfig, lambda_spec: &str, gamma_spec: &str) -> CliResult<solver::SweepTable> {
    let functional = cfg.build()?;
    let solve_cfg = cfg.solve_config();
    let mut beta_cache = None;
    let mut beta = || -> CliResult<f64> {
        if let Some(b) = beta_cache {
            return Ok(b);
        }
        let b = solver::estimate_beta(&functional, &solve_cfg)?.beta_hat;
        beta_cache = Some(b);
        Ok(b)
    };
    let lambdas = parse_grid_spec(lambda_spec, &mut beta)?;
    let gammas = parse_grid_spec(gamma_spec, &mut beta)?;
    let table = solver::sweep(&lambdas, &gammas, &functional, &solve_cfg)?;
    write_file(&cfg.out, "sweep.csv", &sweep_csv(&table))?;
    let best = table.rows.iter().map(|r| r.distinct).max().unwrap_or(0);
    println!(
        "{} cells, best distinct count {best}, uniform norm bound {:e}",
        table.rows.len(),
        table.uniform_bound
    );
    if table.rows.iter().all(|r| r.converged == 0) {
        return Err(CliError::NonConvergence("no cell produced a converged point".into()));
    }
    Ok(table)
}

pub fn cmd_beta(cfg: &RunConfig) -> CliResult<solver::BetaEstimate> {
    let functional = cfg.build()?;
    let beta = solver::estimate_beta(&functional, &cfg.solve_config())?;
    let c = beta.bump.conditions();
    let s = beta.bump.spec;
    let body = format!(
        "beta_hat,bump_ratio,lambda_threshold,s0,r_in,r_out,delta,support,plateau,sup_norm\n{},{},{},{},{},{},{},{},{},{}\n",
        fmt_num(beta.beta_hat),
        fmt_num(beta.bump_ratio),
        fmt_num(beta.lambda_threshold()),
        fmt_num(s.s0),
        fmt_num(s.r_in),
        fmt_num(s.r_out),
        fmt_num(s.delta),
        c.support,
        c.plateau,
        c.sup_norm
    );
    write_file(&cfg.out, "beta.csv", &body)?;
    write_file(&cfg.out, "beta_witness.csv", &profile_csv(&beta.witness))?;
    write_file(&cfg.out, "beta_bump.csv", &profile_csv(&beta.bump.function))?;
    println!(
        "beta_hat {:e} (best bump {:e}), lambda threshold {:e}",
        beta.beta_hat,
        beta.bump_ratio,
        beta.lambda_threshold()
    );
    Ok(beta)
}

/// Reads an `r,u` profile and interpolates it linearly onto the grid nodes.
pub fn read_profile(path: &Path, functional: &EnergyFunctional) -> CliResult<crate::types::DiscreteFunction> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (no == 0 && line.starts_with('r')) {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| CliError::Config(format!("{}:{}: expected r,u", path.display(), no + 1)))?;
        pts.push((parse("r", a.trim())?, parse("u", b.trim())?));
    }
    if pts.len() < 2 || pts.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(CliError::Config("profile needs at least two points with increasing r".into()));
    }
    let interp = |r: f64| {
        let i = pts.partition_point(|(x, _)| *x < r);
        if i == 0 {
            pts[0].1
        } else if i == pts.len() {
            pts[pts.len() - 1].1
        } else {
            let ((x0, y0), (x1, y1)) = (pts[i - 1], pts[i]);
            y0 + (y1 - y0) * (r - x0) / (x1 - x0)
        }
    };
    Ok(crate::types::DiscreteFunction::from_fn(functional.grid().clone(), interp))
}

pub fn cmd_energy(cfg: &RunConfig, profile: &Path) -> CliResult<crate::functionals::EnergyBreakdown> {
    let functional = cfg.build()?;
    let u = read_profile(profile, &functional)?;
    let b = functional.energy(&u)?;
    let res = functional.gradient(&u)?.l2_norm();
    println!("phi,j1,j2,energy,norm_w_p,norm_sing_p,norm_star,residual");
    println!(
        "{},{},{},{},{},{},{},{}",
        fmt_num(b.phi),
        fmt_num(b.j1),
        fmt_num(b.j2),
        fmt_num(b.e),
        fmt_num(b.norm_w_p),
        fmt_num(b.norm_sing_p),
        fmt_num(functional.norm_star(&u)),
        fmt_num(res)
    );
    Ok(b)
}

#[derive(Debug, Parser)]
#[command(name = "hardy-plap", version, about = "Radial finite elements for a singular p-Laplacian Dirichlet problem")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the verification battery and write verify.csv.
    Verify,
    /// Search for critical points at the configured (lambda, gamma).
    Solve,
    /// Sweep a (lambda, gamma) grid and write sweep.csv.
    Sweep {
        /// `a:b:n`, a comma list, or `beta:a:b:n` for multiples of 1/beta_hat.
        #[arg(long, default_value = "beta:0.5:4:8")]
        lambdas: String,
        #[arg(long, default_value = "0")]
        gammas: String,
    },
    /// Estimate beta_hat = sup J1/Phi and write beta.csv.
    Beta,
    /// Print the energy breakdown of an `r,u` profile.
    Energy {
        #[arg(long)]
        profile: PathBuf,
    },
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub p: Option<f64>,
    #[arg(long, global = true)]
    pub n: Option<u32>,
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    #[arg(long, global = true)]
    pub r_omega: Option<f64>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Forcing term: example_f, zero or power:k.
    #[arg(long, global = true)]
    pub f: Option<String>,
    /// Disturbance term: example_g, zero or power:k.
    #[arg(long, global = true)]
    pub g: Option<String>,
    #[arg(long, global = true)]
    pub r_ex: Option<f64>,
    #[arg(long, global = true)]
    pub z: Option<f64>,
    #[arg(long, global = true)]
    pub q: Option<f64>,
    #[arg(long, global = true)]
    pub elements: Option<usize>,
    #[arg(long, global = true)]
    pub grading: Option<f64>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub eps_reg: Option<f64>,
    #[arg(long, global = true)]
    pub random_starts: Option<usize>,
    /// Skip the growth/limit checks on f and g before solving.
    #[arg(long, global = true)]
    pub no_enforce_conditions: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { cfg.set(stringify!($field), &v.to_string())?; })*
            };
        }
        take!(p, n, mu, r_omega, lambda, gamma, r_ex, z, q, elements, grading, tol, eps_reg, random_starts, seed);
        if let Some(v) = &self.f {
            cfg.f = v.clone();
        }
        if let Some(v) = &self.g {
            cfg.g = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if self.no_enforce_conditions {
            cfg.solve.enforce_conditions = false;
        }
        Ok(cfg)
    }
}

/// Runs the command line and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = cli.overrides.resolve().and_then(|cfg| match &cli.command {
        Command::Verify => cmd_verify(&cfg).map(|_| ()),
        Command::Solve => cmd_solve(&cfg).map(|_| ()),
        Command::Sweep { lambdas, gammas } => cmd_sweep(&cfg, lambdas, gammas).map(|_| ()),
        Command::Beta => cmd_beta(&cfg).map(|_| ()),
        Command::Energy { profile } => cmd_energy(&cfg, profile).map(|_| ()),
    });
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_and_errors() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# comment\n p = 3 \nn=5 # trailing\n\nmu = 0.5\nout = /tmp/x\n").unwrap();
        assert_eq!((cfg.p, cfg.n, cfg.mu), (3.0, 5, 0.5));
        assert_eq!(cfg.out, PathBuf::from("/tmp/x"));
        assert!(cfg.apply_text("bogus = 1").is_err());
        assert!(cfg.apply_text("p 3").is_err());
        assert!(cfg.apply_text("p = x").is_err());
    }

    #[test]
    fn invalid_parameters_are_config_errors() {
        let cfg = RunConfig { p: 1.5, ..RunConfig::default() };
        assert_eq!(cfg.build().unwrap_err().exit_code(), EXIT_CONFIG);
        let cfg = RunConfig { q: 6.0, ..RunConfig::default() };
        assert_eq!(cfg.build().unwrap_err().exit_code(), EXIT_CONFIG);
        assert!(RunConfig::default().build().is_ok());
    }

    #[test]
    fn grid_specs() {
        let never = || -> CliResult<f64> { panic!("beta not needed") };
        assert_eq!(parse_grid_spec("0:1:3", never).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid_spec("0.5,2", never).unwrap(), vec![0.5, 2.0]);
        assert_eq!(parse_grid_spec("beta:1:2:2", || Ok(0.5)).unwrap(), vec![2.0, 4.0]);
        assert!(parse_grid_spec("1:2", never).is_err());
        assert!(parse_grid_spec("-1", never).is_err());
        assert!(parse_grid_spec("0:1:0", never).is_err());
    }

    #[test]
    fn number_format_has_17_digits() {
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_num(-2.0), "-2.0000000000000000e0");
    }
}
