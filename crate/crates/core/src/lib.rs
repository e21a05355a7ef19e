//! Radial finite elements for the Dirichlet problem
//!
//! ```text
//! -Δp u + μ |u|^{p-2} u / |x|^p = λ f(u) + γ g(u)   in B(0, R),   u = 0 on ∂B(0, R)
//! ```
//!
//! with `2 <= p < n`. Functions are radial, continuous and piecewise linear on a
//! graded partition of `[0, R]`. The crate assembles the energy
//! `E = Φ - λ J1 - γ J2` and its derivative, audits the inequalities the
//! variational theory relies on (Hardy, Chabrowski, Poincaré, uniform
//! monotonicity, uniform convexity of the energy norm) and searches for
//! several critical points of `E` at once.
//!
//! Module map:
//!
//! * [`types`]: parameters, derived constants, grids and discrete functions.
//! * [`quadrature`]: exact weighted moments and Gauss rules.
//! * [`nonlinear`]: the forcing/disturbance terms and their growth audits.
//! * [`functionals`]: energies, gradients, Newton matrices and norms.
//! * [`analysis`]: randomized audits of the inequalities.
//! * [`solver`]: inversion of `Φ'`, critical point search, `β` estimation, sweeps.
//! * [`cli`]: configuration, command implementations and CSV output.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod functionals;
pub mod linalg;
pub mod nonlinear;
mod optim;
pub mod quadrature;
pub mod rng;
pub mod solver;
pub mod types;

pub use error::{Error, Result};
pub use functionals::{EnergyBreakdown, EnergyFunctional, GradientVector};
pub use nonlinear::{ExampleParams, Kind, Nonlinearity};
pub use types::{make_grid, DerivedConstants, DiscreteFunction, EnergyParams, RadialGrid};
