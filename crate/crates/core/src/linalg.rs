//! Tridiagonal matrices and small vector helpers.

use crate::error::{Error, Result};

/// Square tridiagonal matrix stored by diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    /// Sub-diagonal, `lower[i] = A[i + 1][i]`.
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    /// Super-diagonal, `upper[i] = A[i][i + 1]`.
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n.saturating_sub(1)],
            diag: vec![0.0; n],
            upper: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Adds `k * [[a, b], [b, c]]` to the block at rows/columns `(i, i + 1)`,
    /// dropping entries that fall outside the matrix.
    pub fn add_element_block(&mut self, i: usize, block: [[f64; 2]; 2]) {
        let n = self.dim();
        if i < n {
            self.diag[i] += block[0][0];
        }
        if i + 1 < n {
            self.diag[i + 1] += block[1][1];
            self.upper[i] += block[0][1];
            self.lower[i] += block[1][0];
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.lower == self.upper
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    pub fn max_abs(&self) -> f64 {
        self.lower
            .iter()
            .chain(&self.diag)
            .chain(&self.upper)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.lower.iter_mut().zip(&other.lower) {
            *a += alpha * b;
        }
        for (a, b) in self.diag.iter_mut().zip(&other.diag) {
            *a += alpha * b;
        }
        for (a, b) in self.upper.iter_mut().zip(&other.upper) {
            *a += alpha * b;
        }
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting
    /// (the `gtsv` scheme: one extra super-diagonal of fill-in).
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut dl = self.lower.clone();
        let mut d = self.diag.clone();
        let mut du = self.upper.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut x = b.to_vec();
        let scale = self.max_abs().max(f64::MIN_POSITIVE);

        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    return Err(Error::SingularMatrix(i));
                }
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
                x[i + 1] -= fact * x[i];
                dl[i] = fact;
                if i + 2 < n {
                    du2[i] = 0.0;
                }
            } else {
                // swap rows i and i + 1
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let tmp = d[i + 1];
                d[i + 1] = du[i] - fact * tmp;
                du[i] = tmp;
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                x.swap(i, i + 1);
                x[i + 1] -= fact * x[i];
                dl[i] = fact;
            }
        }
        if d[n - 1].abs() <= 1e-300 * scale || !d[n - 1].is_finite() {
            return Err(Error::SingularMatrix(n - 1));
        }

        x[n - 1] /= d[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix(0));
        }
        Ok(x)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn dense(t: &Tridiagonal) -> DMatrix<f64> {
        let n = t.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = t.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = t.upper[i];
                m[(i + 1, i)] = t.lower[i];
            }
        }
        m
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let t = Tridiagonal {
            lower: vec![1.0, 1.0],
            diag: vec![0.0, 0.0, 1.0],
            upper: vec![1.0, 1.0],
        };
        let x = t.solve(&[1.0, 2.0, 3.0]).unwrap();
        let back = t.mul_vec(&x);
        for (a, b) in back.iter().zip(&[1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_is_reported() {
        let t = Tridiagonal::zeros(3);
        assert!(t.solve(&[1.0, 0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn solve_matches_dense_lu(
            n in 1usize..12,
            seed in prop::collection::vec(-1.0f64..1.0, 36),
        ) {
            let mut t = Tridiagonal::zeros(n);
            for i in 0..n {
                t.diag[i] = seed[i] + if i % 3 == 0 { 0.0 } else { 2.5 };
            }
            for i in 0..n.saturating_sub(1) {
                t.lower[i] = seed[12 + i];
                t.upper[i] = seed[24 + i];
            }
            let b: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0).sin()).collect();
            let lu = dense(&t).lu();
            if let Some(expected) = lu.solve(&DVector::from_vec(b.clone())) {
                let cond_guard = expected.amax();
                prop_assume!(cond_guard < 1e6);
                let x = t.solve(&b).unwrap();
                for i in 0..n {
                    prop_assert!((x[i] - expected[i]).abs() <= 1e-8 * (1.0 + cond_guard));
                }
            }
        }
    }
}
