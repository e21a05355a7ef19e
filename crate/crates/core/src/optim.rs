//! Preconditioned gradient ascent with an adaptive Armijo step.

use crate::error::{Error, Result};
use crate::linalg::dot;

#[derive(Debug, Clone)]
pub struct AscentOutcome {
    pub x: Vec<f64>,
    pub value: f64,
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Maximizes `eval` starting from `x0`.
///
/// `eval` returns the value and its nodal gradient; `precond(x, g)` maps the
/// gradient to a search direction (falls back to `g` when it fails). Stops
/// after `max_iter` steps, when a line search fails, or when three successive
/// steps improve the value by less than `rel_tol` relative.
pub fn preconditioned_ascent<E, P>(
    x0: Vec<f64>,
    mut eval: E,
    precond: P,
    max_iter: usize,
    rel_tol: f64,
) -> Result<AscentOutcome>
where
    E: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    P: Fn(&[f64], &[f64]) -> Result<Vec<f64>>,
{
    let mut x = x0;
    let (mut value, mut grad) = eval(&x)?;
    if !value.is_finite() {
        return Err(Error::InvalidArgument("non-finite starting value".into()));
    }
    let mut step = 1.0;
    let mut stalls = 0;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut dir = precond(&x, &grad).unwrap_or_else(|_| grad.clone());
        let mut slope = dot(&grad, &dir);
        if !(slope > 0.0) || !slope.is_finite() {
            dir = grad.clone();
            slope = dot(&grad, &dir);
            if !(slope > 0.0) {
                break;
            }
        }
        let mut accepted = None;
        let mut t = step;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            if let Ok((v, g)) = eval(&trial) {
                if v.is_finite() && v >= value + ARMIJO * t * slope {
                    accepted = Some((trial, v, g));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((trial, v, g)) = accepted else {
            break;
        };
        let gain = v - value;
        x = trial;
        value = v;
        grad = g;
        step = (t * 2.0).min(1e6);
        if gain <= rel_tol * value.abs().max(f64::MIN_POSITIVE) {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    Ok(AscentOutcome { x, value })
}
