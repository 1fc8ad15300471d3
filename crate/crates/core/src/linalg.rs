//! Small dense linear algebra helpers shared by the samplers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Cholesky factorisation with bounded diagonal jitter.
///
/// On failure `1e-10 * trace / k` is added to the diagonal and escalated by a factor of 10
/// up to `1e-6 * trace / k`; past that the matrix is reported as not positive definite.
pub fn cholesky_jittered(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let k = m.nrows();
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let scale = m.trace() / k as f64;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::NotPositiveDefinite { dim: k });
    }
    let mut jitter = 1e-10 * scale;
    while jitter <= 1e-6 * scale * (1.0 + 1e-9) {
        let mut j = m.clone();
        for i in 0..k {
            j[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(j) {
            return Ok(c);
        }
        jitter *= 10.0;
    }
    Err(Error::NotPositiveDefinite { dim: k })
}

/// Solves `L' x = z` for the lower Cholesky factor `L`.
pub fn solve_upper_transpose(chol: &Cholesky<f64, Dyn>, z: &DVector<f64>) -> DVector<f64> {
    let l = chol.l_dirty();
    let n = z.len();
    let mut x = z.clone();
    for i in (0..n).rev() {
        let mut s = x[i];
        for r in (i + 1)..n {
            s -= l[(r, i)] * x[r];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Symmetric inverse square root of the 2x2 pair covariance `s2 * [[1, rho], [rho, 1]]`.
///
/// Returns `(diag, off)` so that the matrix is `[[diag, off], [off, diag]]`.
pub fn pair_inverse_sqrt(rho: f64, s2: f64) -> (f64, f64) {
    let plus = 1.0 / (s2 * (1.0 + rho)).sqrt();
    let minus = 1.0 / (s2 * (1.0 - rho)).sqrt();
    ((plus + minus) / 2.0, (plus - minus) / 2.0)
}

/// Minimum eigenvalue of a symmetric 2x2 matrix.
pub fn min_eigen_2x2(a: f64, b: f64, d: f64) -> f64 {
    let mid = (a + d) / 2.0;
    let rad = (((a - d) / 2.0).powi(2) + b * b).sqrt();
    mid - rad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_inverse_sqrt_whitens() {
        for &(rho, s2) in &[(0.0, 1.0), (0.5, 1.0), (-0.7, 2.5), (0.95, 0.3)] {
            let (d, o) = pair_inverse_sqrt(rho, s2);
            let m = DMatrix::from_row_slice(2, 2, &[d, o, o, d]);
            let sigma = DMatrix::from_row_slice(2, 2, &[s2, s2 * rho, s2 * rho, s2]);
            let id = &m * sigma * &m;
            assert!((id - DMatrix::identity(2, 2)).abs().max() < 1e-12);
        }
    }

    #[test]
    fn jitter_rescues_semidefinite_but_not_negative() {
        let psd = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(cholesky_jittered(&psd).is_ok());
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            cholesky_jittered(&neg),
            Err(Error::NotPositiveDefinite { dim: 2 })
        ));
        assert!(cholesky_jittered(&DMatrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn upper_transpose_solve_matches_inverse() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let c = cholesky_jittered(&m).unwrap();
        let z = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let x = solve_upper_transpose(&c, &z);
        let lt = c.l().transpose();
        assert!((lt * x - z).abs().max() < 1e-12);
    }
}
