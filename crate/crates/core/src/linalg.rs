//! Small dense linear-algebra helpers shared by the models and filters.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Matrix exponential `exp(a)` by scaling and squaring of the truncated Taylor series.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::InvalidModel(format!(
            "expm needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidModel("non-finite matrix entry".into()));
    }
    let n = a.nrows();
    let norm = one_norm(a);
    // Scale so that the series argument has 1-norm at most 1/2.
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);

    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=40 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if one_norm(&term) <= 1e-18 * one_norm(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(sum)
}

/// Maximum absolute column sum.
pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `(p + pᵀ) / 2`, in place.
pub fn symmetrize(p: &mut DMatrix<f64>) {
    let n = p.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
}

/// A factor `L` with `L Lᵀ = cov` for a symmetric positive semi-definite matrix.
///
/// Uses the eigendecomposition so that singular (including zero) covariances are accepted.
pub fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !cov.is_square() || cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidModel("covariance must be square and finite".into()));
    }
    let asym = (cov - cov.transpose()).amax();
    if asym > 1e-9 * (1.0 + cov.amax()) {
        return Err(Error::InvalidModel("covariance is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(cov.clone());
    let floor = -1e-10 * (1.0 + cov.amax());
    if eig.eigenvalues.iter().any(|&l| l < floor) {
        return Err(Error::InvalidModel("covariance is not positive semi-definite".into()));
    }
    let sqrt = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
    );
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn expm_of_zero_is_identity() {
        let e = expm(&DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(e, DMatrix::identity(2, 2));
    }

    #[test]
    fn expm_scalar_matches_exp() {
        let e = expm(&DMatrix::from_element(1, 1, -0.1)).unwrap();
        assert_relative_eq!(e[(0, 0)], (-0.1f64).exp(), epsilon = 1e-15);
        let e = expm(&DMatrix::from_element(1, 1, 12.5)).unwrap();
        assert_relative_eq!(e[(0, 0)], 12.5f64.exp(), max_relative = 1e-13);
    }

    #[test]
    fn expm_rotation_generator() {
        // exp([[0, -θ], [θ, 0]]) is a rotation by θ.
        let th = 2.3;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -th, th, 0.0]);
        let e = expm(&a).unwrap();
        let r = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        assert_relative_eq!(e, r, epsilon = 1e-13);
    }

    #[test]
    fn expm_rejects_nan() {
        let a = DMatrix::from_element(2, 2, f64::NAN);
        assert!(matches!(expm(&a), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn psd_factor_reconstructs() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let l = psd_factor(&cov).unwrap();
        assert_relative_eq!(&l * l.transpose(), cov, epsilon = 1e-12);
        let zero = psd_factor(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(zero.amax(), 0.0);
    }

    #[test]
    fn psd_factor_rejects_indefinite() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(psd_factor(&cov).is_err());
    }
}
