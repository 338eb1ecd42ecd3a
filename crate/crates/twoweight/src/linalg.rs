//! Largest singular values.
//!
//! Power iteration on `A^T A` is the primary estimator; for matrices whose
//! smaller side is at most [`DENSE_LIMIT`] the value is certified by a dense
//! SVD and the dense value is returned.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub const DENSE_LIMIT: usize = 512;
pub const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub power: f64,
    pub iterations: usize,
    pub dense: Option<f64>,
}

fn seed_vector(n: usize) -> DVector<f64> {
    // all-ones plus a fixed perturbation so that no singular vector is missed
    // by symmetry (e.g. the antisymmetric lattice kernel kills all-ones).
    DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.754_877_666).fract())
}

/// Power iteration on the normal operator; returns the estimate and the
/// number of iterations used.
pub fn power_norm(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> (f64, usize) {
    if a.nrows() == 0 || a.ncols() == 0 {
        return (0.0, 0);
    }
    let mut v = seed_vector(a.ncols());
    v /= v.norm();
    let mut est = 0.0;
    for it in 1..=max_iter {
        let av = a * &v;
        let next = av.norm();
        let mut u = a.transpose() * av;
        let nu = u.norm();
        if nu == 0.0 {
            return (next, it);
        }
        u /= nu;
        v = u;
        if (next - est).abs() <= tol * next.max(f64::MIN_POSITIVE) {
            return (next, it);
        }
        est = next;
    }
    (est, max_iter)
}

pub fn dense_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone().singular_values().max()
}

pub fn spectral_norm(a: &DMatrix<f64>) -> NormEstimate {
    let (power, iterations) = power_norm(a, POWER_TOL, POWER_MAX_ITER);
    let dense = (a.nrows().min(a.ncols()) <= DENSE_LIMIT).then(|| dense_norm(a));
    NormEstimate { value: dense.unwrap_or(power), power, iterations, dense }
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.clone().symmetric_eigen().eigenvalues.max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_matrix() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 2.0]));
        let e = spectral_norm(&a);
        assert_relative_eq!(e.value, 3.0, epsilon = 1e-12);
        assert_relative_eq!(e.power, 3.0, epsilon = 1e-8);
    }

    #[test]
    fn rank_one() {
        let u = DVector::from_vec(vec![1.0, 2.0]);
        let v = DVector::from_vec(vec![3.0, 0.0, 4.0]);
        let a = &u * v.transpose();
        assert_relative_eq!(spectral_norm(&a).value, 5.0 * 5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn antisymmetric_power_agrees_with_dense() {
        let n = 24;
        let a = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 / (i as f64 - j as f64) });
        let e = spectral_norm(&a);
        assert!(e.value < std::f64::consts::PI);
        assert!((e.power - e.value).abs() < 1e-6 * e.value);
    }
}
