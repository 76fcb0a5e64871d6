use nalgebra::{DMatrix, DVector};

use crate::linalg::expm;
use crate::{Error, Result};

/// Exact zero-order-hold discretization of `ẋ = A x`: returns `exp(A dt)`.
pub fn zoh_discretize(a_cont: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidModel(format!("timestep must be positive, got {dt}")));
    }
    expm(&(a_cont * dt))
}

/// One classical fourth-order Runge-Kutta step of `ẋ = drift(x)`.
pub fn rk4_step<F>(drift: F, x: &DVector<f64>, dt: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let finite = |v: &DVector<f64>| v.iter().all(|e| e.is_finite());
    let k1 = drift(x);
    if !finite(&k1) {
        return Err(Error::IntegrationDiverged { step: 0 });
    }
    let k2 = drift(&(x + &k1 * (0.5 * dt)));
    let k3 = drift(&(x + &k2 * (0.5 * dt)));
    let k4 = drift(&(x + &k3 * dt));
    if !(finite(&k2) && finite(&k3) && finite(&k4)) {
        return Err(Error::IntegrationDiverged { step: 0 });
    }
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if !finite(&next) {
        return Err(Error::IntegrationDiverged { step: 0 });
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::model::pendulum_drift;
    use approx::assert_relative_eq;

    #[test]
    fn zero_field_fixes_points() {
        let x = DVector::from_vec(vec![3.0, -1.0]);
        let out = rk4_step(|v: &DVector<f64>| DVector::zeros(v.len()), &x, 0.1).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn exponential_growth_step() {
        // k1 = 1, k2 = 1.05, k3 = 1.0525, k4 = 1.10525 → 1 + 0.1/6 · 6.31025
        let out = rk4_step(|v: &DVector<f64>| v.clone(), &DVector::from_element(1, 1.0), 0.1).unwrap();
        assert_relative_eq!(out[0], 1.105_170_833_333_333_3, epsilon = 1e-14);
        // local truncation error of one step is about 8.5e-8
        assert!((out[0] - 0.1f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn pendulum_equilibrium_is_fixed() {
        let out = rk4_step(pendulum_drift, &DVector::zeros(2), 0.01).unwrap();
        assert_eq!(out, DVector::zeros(2));
    }

    #[test]
    fn divergence_is_reported() {
        let blowup = |v: &DVector<f64>| v.map(|e| e.exp().exp());
        let err = rk4_step(blowup, &DVector::from_element(1, 700.0), 1.0).unwrap_err();
        assert!(matches!(err, Error::IntegrationDiverged { .. }));
    }

    #[test]
    fn zoh_scalar_and_zero() {
        let a = zoh_discretize(&DMatrix::from_element(1, 1, -1.0), 0.1).unwrap();
        assert_relative_eq!(a[(0, 0)], 0.904_837_418_035_959_6, epsilon = 1e-15);
        assert_eq!(zoh_discretize(&DMatrix::zeros(2, 2), 0.1).unwrap(), DMatrix::identity(2, 2));
        assert!(zoh_discretize(&DMatrix::zeros(2, 2), 0.0).is_err());
        assert!(zoh_discretize(&DMatrix::from_element(2, 2, f64::INFINITY), 0.1).is_err());
    }
}
