//! Tridiagonal solvers and the inverse-power ground-state iteration that
//! back the implicit steppers and the variational eigenproblems.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Symmetric tridiagonal matrix: `diag` has length n, `off` length n-1.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.off[i] * x[i + 1];
            }
            y[i] = v;
        }
        y
    }

    /// Thomas algorithm for `(self + shift I) x = rhs`.
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0] + shift;
        if denom == 0.0 {
            return Err(Error::Spectrum("zero pivot in tridiagonal solve".into()));
        }
        if n > 1 {
            c[0] = self.off[0] / denom;
        }
        d[0] = rhs[0] / denom;
        for i in 1..n {
            denom = self.diag[i] + shift - self.off[i - 1] * c[i - 1];
            if denom == 0.0 {
                return Err(Error::Spectrum("zero pivot in tridiagonal solve".into()));
            }
            if i + 1 < n {
                c[i] = self.off[i] / denom;
            }
            d[i] = (rhs[i] - self.off[i - 1] * d[i - 1]) / denom;
        }
        let mut x = d;
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= c[i] * next;
        }
        Ok(x)
    }

    /// Rayleigh quotient `x^T A x / x^T x`.
    pub fn rayleigh(&self, x: &[f64]) -> f64 {
        let ax = self.apply(x);
        let num: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let den: f64 = x.iter().map(|a| a * a).sum();
        num / den
    }

    /// Ground state by shifted inverse power iteration.
    ///
    /// The shift must sit strictly below the spectrum; a Gershgorin bound is
    /// used so callers need not guess. Returns `(eigenvalue, unit vector)`
    /// with the vector normalized in plain l2 and made nonnegative in sign.
    pub fn ground_state(&self, tol: f64, max_iter: usize) -> Result<(f64, Vec<f64>)> {
        let n = self.n();
        let mut bound = f64::INFINITY;
        for i in 0..n {
            let mut radius = 0.0;
            if i > 0 {
                radius += self.off[i - 1].abs();
            }
            if i + 1 < n {
                radius += self.off[i].abs();
            }
            bound = bound.min(self.diag[i] - radius);
        }
        let shift = -(bound - 1.0);
        let mut x = vec![1.0; n];
        let norm0 = (n as f64).sqrt();
        for v in x.iter_mut() {
            *v /= norm0;
        }
        let mut last = f64::INFINITY;
        for _ in 0..max_iter {
            let mut y = self.solve_shifted(shift, &x)?;
            let norm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::Spectrum("inverse iteration diverged".into()));
            }
            for v in y.iter_mut() {
                *v /= norm;
            }
            let delta: f64 = y
                .iter()
                .zip(&x)
                .map(|(a, b)| (a.abs() - b.abs()).powi(2))
                .sum::<f64>()
                .sqrt();
            x = y;
            let value = self.rayleigh(&x);
            if delta < tol && (value - last).abs() < tol * (1.0 + value.abs()) {
                last = value;
                break;
            }
            last = value;
        }
        // ground state of a Jacobi matrix with negative off-diagonals is
        // sign-definite; orient it nonnegative
        let sum: f64 = x.iter().sum();
        if sum < 0.0 {
            for v in x.iter_mut() {
                *v = -*v;
            }
        }
        Ok((last, x))
    }
}

/// General (non-symmetric) tridiagonal solve, rows `lower[i-1], diag[i], upper[i]`.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::Spectrum("zero pivot in tridiagonal solve".into()));
    }
    if n > 1 {
        c[0] = upper[0] / denom;
    }
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i - 1] * c[i - 1];
        if denom == 0.0 {
            return Err(Error::Spectrum("zero pivot in tridiagonal solve".into()));
        }
        if i + 1 < n {
            c[i] = upper[i] / denom;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    Ok(x)
}

/// Complex symmetric tridiagonal solve (constant structure, varying diagonal).
pub fn solve_complex_tridiagonal(
    diag: &[Complex64],
    off: &[Complex64],
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = diag.len();
    let mut c = vec![Complex64::default(); n];
    let mut d = vec![Complex64::default(); n];
    let mut denom = diag[0];
    if denom.norm_sqr() == 0.0 {
        return Err(Error::Spectrum(
            "zero pivot in complex tridiagonal solve".into(),
        ));
    }
    if n > 1 {
        c[0] = off[0] / denom;
    }
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - off[i - 1] * c[i - 1];
        if denom.norm_sqr() == 0.0 {
            return Err(Error::Spectrum(
                "zero pivot in complex tridiagonal solve".into(),
            ));
        }
        if i + 1 < n {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solves_match_apply() {
        let a = SymTridiagonal {
            diag: vec![4.0, 5.0, 6.0, 5.0, 4.0],
            off: vec![-1.0, -1.5, -0.5, -1.0],
        };
        let x_true = vec![1.0, -2.0, 0.5, 3.0, -1.0];
        let rhs = a.apply(&x_true);
        let x = a.solve_shifted(0.0, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ground_state_of_free_laplacian() {
        // -(d^2/dx^2) with Dirichlet ends on [0, 1]: lowest mode sin(pi x),
        // eigenvalue pi^2 up to O(h^2)
        let n = 200;
        let h = 1.0 / (n as f64 + 1.0);
        let a = SymTridiagonal {
            diag: vec![2.0 / (h * h); n],
            off: vec![-1.0 / (h * h); n - 1],
        };
        let (val, vec) = a.ground_state(1e-13, 500).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((val - pi2).abs() / pi2 < 1e-3, "eigenvalue {val}");
        assert!(vec.iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn general_tridiagonal_solver() {
        let lower = vec![1.0, 2.0, 0.5];
        let diag = vec![5.0, 6.0, 7.0, 5.0];
        let upper = vec![-1.0, 0.5, 1.5];
        let x_true = vec![0.3, -1.2, 2.0, 0.7];
        let mut rhs = vec![0.0; 4];
        for i in 0..4 {
            rhs[i] = diag[i] * x_true[i];
            if i > 0 {
                rhs[i] += lower[i - 1] * x_true[i - 1];
            }
            if i + 1 < 4 {
                rhs[i] += upper[i] * x_true[i + 1];
            }
        }
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
