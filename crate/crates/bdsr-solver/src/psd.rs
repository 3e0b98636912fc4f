use faer::{Mat, Side};

use crate::SolverError;

/// Frobenius-nearest PSD matrix: eigenvalues clamped at zero.
pub fn nearest_psd_projection(m: &Mat<f64>) -> Result<Mat<f64>, SolverError> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(SolverError::NotSymmetric(f64::INFINITY));
    }
    let mut scale = 1.0f64;
    let mut asym = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            scale = scale.max(m[(i, j)].abs());
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > 1e-12 * scale {
        return Err(SolverError::NotSymmetric(asym));
    }
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| SolverError::Eigen)?;
    let u = evd.U();
    let s = evd.S().column_vector();
    if (0..n).all(|i| s[i] >= 0.0) {
        return Ok(m.to_owned());
    }
    let scaled = Mat::from_fn(n, n, |i, k| u[(i, k)] * s[k].max(0.0));
    let p = &scaled * u.transpose();
    Ok(Mat::from_fn(n, n, |i, j| 0.5 * (p[(i, j)] + p[(j, i)])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_negative_eigenvalue() {
        let m = Mat::from_fn(2, 2, |i, j| if i != j { 0.0 } else if i == 0 { 1.0 } else { -1.0 });
        let p = nearest_psd_projection(&m).unwrap();
        assert_eq!(p[(0, 0)], 1.0);
        assert!(p[(1, 1)].abs() < 1e-15);
        assert!(p[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn psd_input_unchanged() {
        let m = Mat::from_fn(3, 3, |i, j| if i == j { 2.0 } else { 0.5 });
        assert_eq!(nearest_psd_projection(&m).unwrap(), m);
    }

    #[test]
    fn rejects_asymmetric() {
        let m = Mat::from_fn(2, 2, |i, j| (i * 2 + j) as f64);
        assert!(matches!(nearest_psd_projection(&m), Err(SolverError::NotSymmetric(_))));
    }
}
