//! Small dense kernels: Lyapunov solve, pseudo-inverse, jittered Cholesky.

use nalgebra::{DMatrix, DVector};

use crate::error::{FieldError, Result};

/// Solves `A X + X Aᵀ = C` through the Kronecker-sum system.
pub fn lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let k = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, c.iter().copied());
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| FieldError::Numeric("Lyapunov system is singular".into()))?;
    Ok(DMatrix::from_iterator(n, n, sol.iter().copied()))
}

/// Moore–Penrose inverse of a symmetric matrix, discarding eigenvalues below
/// `cutoff` times the largest in magnitude.
pub fn symmetric_pinv(m: &DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |t, v| t.max(v.abs()));
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let lam = eig.eigenvalues[k];
        if lam.abs() > cutoff * top && lam != 0.0 {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / lam;
        }
    }
    out
}

/// Jitter ladder relative to the mean diagonal.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// Cholesky factor of `m`, escalating diagonal jitter along
/// [`JITTER_LADDER`]. Returns the factor and the jitter used.
pub fn jittered_cholesky(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), 0.0));
    }
    let mean_diag = m.diagonal().mean().abs().max(f64::MIN_POSITIVE);
    for &eps in &JITTER_LADDER {
        let mut a = m.clone();
        let jitter = eps * mean_diag;
        for i in 0..n {
            a[(i, i)] += jitter;
        }
        if let Some(ch) = a.cholesky() {
            return Ok((ch.l(), jitter));
        }
    }
    Err(FieldError::Numeric(format!(
        "covariance of {n} points is not positive definite at jitter 1e-8"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lyapunov_residual_vanishes() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 1.0, 1.5, -0.4, 0.2, 0.0, 3.0]);
        let c = DMatrix::identity(3, 3);
        let x = lyapunov(&a, &c).unwrap();
        let r = &a * &x + &x * a.transpose() - &c;
        assert!(r.norm() < 1e-12);
        assert!((&x - x.transpose()).norm() < 1e-12);
    }

    #[test]
    fn pinv_inverts_regular_and_projects_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let p = symmetric_pinv(&m, 1e-10);
        assert!((&m * &p - DMatrix::identity(2, 2)).norm() < 1e-12);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let ps = symmetric_pinv(&s, 1e-10);
        assert!((&s * &ps * &s - &s).norm() < 1e-12);
    }

    #[test]
    fn cholesky_falls_back_to_jitter() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (l, jitter) = jittered_cholesky(&m).unwrap();
        assert!(jitter > 0.0);
        assert!((&l * l.transpose() - &m).norm() < 1e-6);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(jittered_cholesky(&bad).is_err());
    }
}
