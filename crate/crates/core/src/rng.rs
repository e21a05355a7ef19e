//! Counter-based sampling: sample `k` of a run always draws from the same
//! ChaCha stream, so serial and parallel audits see identical inputs.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::types::{DiscreteFunction, RadialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleStream {
    seed: u64,
}

impl SampleStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Derives an independent stream for a named sub-audit.
    pub fn fork(&self, tag: u64) -> Self {
        Self {
            seed: self.seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        }
    }

    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// Nodal values drawn uniformly from `[-amplitude, amplitude]`.
pub fn random_rough(grid: &Arc<RadialGrid>, rng: &mut impl Rng, amplitude: f64) -> DiscreteFunction {
    let coeffs = (0..grid.dofs())
        .map(|_| rng.random_range(-amplitude..=amplitude))
        .collect();
    DiscreteFunction::new(grid.clone(), coeffs).expect("length matches grid")
}

/// Random combination of the first few radial modes `cos((k + 1/2) π r / R)`
/// plus a small rough component.
pub fn random_smooth(grid: &Arc<RadialGrid>, rng: &mut impl Rng, amplitude: f64) -> DiscreteFunction {
    let r_omega = grid.r_omega();
    let weights: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut u = DiscreteFunction::from_fn(grid.clone(), |r| {
        weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * ((k as f64 + 0.5) * PI * r / r_omega).cos())
            .sum::<f64>()
    });
    for c in u.coeffs_mut() {
        *c = amplitude * (*c + 0.05 * rng.random_range(-1.0..=1.0));
    }
    u
}
