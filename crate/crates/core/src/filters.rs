//! Kalman filter (linear systems) and extended Kalman filter (nonlinear systems) baselines.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{Dynamics, ModelKind, SystemModel, Trajectory};
use crate::linalg::symmetrize;
use crate::{Error, Result};

/// Mean and error covariance of a Kalman-type filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Kf,
    Ekf,
}

impl FilterKind {
    /// The baseline matching a model: KF for linear systems, EKF otherwise.
    pub fn for_model(model: &SystemModel) -> Self {
        match model.kind() {
            ModelKind::LinearZoh => FilterKind::Kf,
            ModelKind::NonlinearRk => FilterKind::Ekf,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Kf => "kf",
            FilterKind::Ekf => "ekf",
        }
    }

    fn required_kind(self) -> ModelKind {
        match self {
            FilterKind::Kf => ModelKind::LinearZoh,
            FilterKind::Ekf => ModelKind::NonlinearRk,
        }
    }
}

fn check_kind(model: &SystemModel, kind: FilterKind) -> Result<()> {
    let expected = kind.required_kind();
    if model.kind() != expected {
        return Err(Error::KindMismatch {
            expected: expected.as_str(),
            found: model.kind().as_str(),
        });
    }
    Ok(())
}

/// Prior encoding the training distribution of initial conditions.
///
/// The mean defaults to the centroid of `model.init_region`; the covariance is
/// `P0` plus the per-axis variance of a uniform draw from that box. The same
/// prior is kept for out-of-region tests.
pub fn initial_state(model: &SystemModel, init_mean: Option<DVector<f64>>) -> Result<FilterState> {
    let mean = init_mean.unwrap_or_else(|| model.init_region.centroid());
    if mean.len() != model.n {
        return Err(Error::ShapeMismatch(format!(
            "initial mean has length {}, model has n = {}",
            mean.len(),
            model.n
        )));
    }
    let cov = &model.p0 + DMatrix::from_diagonal(&model.init_region.uniform_variances());
    Ok(FilterState { mean, cov })
}

pub fn kf_init(model: &SystemModel, init_mean: Option<DVector<f64>>) -> Result<FilterState> {
    check_kind(model, FilterKind::Kf)?;
    initial_state(model, init_mean)
}

pub fn ekf_init(model: &SystemModel, init_mean: Option<DVector<f64>>) -> Result<FilterState> {
    check_kind(model, FilterKind::Ekf)?;
    initial_state(model, init_mean)
}

/// Measurement update with linear measurement matrix `h`.
fn update(
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<FilterState> {
    if y.len() != h.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "measurement has length {}, model has m = {}",
            y.len(),
            h.nrows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::ShapeMismatch("measurement contains non-finite entries".into()));
    }
    let ph_t = &cov * h.transpose();
    let mut s = h * &ph_t + r;
    symmetrize(&mut s);
    let chol = s.cholesky().ok_or(Error::SingularInnovation)?;
    // K = P Hᵀ S⁻¹, computed as (S⁻¹ H P)ᵀ with S symmetric.
    let gain = chol.solve(&ph_t.transpose()).transpose();
    let innovation = y - h * &mean;
    let mean = mean + &gain * innovation;
    let n = cov.nrows();
    let mut cov = (DMatrix::identity(n, n) - &gain * h) * cov;
    symmetrize(&mut cov);
    Ok(FilterState { mean, cov })
}

/// One Kalman predict-update step on a linear model.
pub fn kf_step(state: &FilterState, model: &SystemModel, y: &DVector<f64>) -> Result<FilterState> {
    let Dynamics::LinearZoh { a_d, .. } = &model.dynamics else {
        return Err(Error::KindMismatch {
            expected: ModelKind::LinearZoh.as_str(),
            found: model.kind().as_str(),
        });
    };
    let mean = a_d * &state.mean;
    let mut cov = a_d * &state.cov * a_d.transpose() + &model.q;
    symmetrize(&mut cov);
    update(mean, cov, &model.c, &model.r, y)
}

/// Jacobian of the discrete step map `x ↦ f(x)` by central differences.
///
/// The step for coordinate `i` is `1e-6 · (1 + |xᵢ|)`.
pub fn step_jacobian(model: &SystemModel, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = x.clone();
    for i in 0..n {
        let h = 1e-6 * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let plus = model.step(&probe)?;
        probe[i] = x[i] - h;
        let minus = model.step(&probe)?;
        probe[i] = x[i];
        jac.set_column(i, &((plus - minus) / (2.0 * h)));
    }
    Ok(jac)
}

/// Jacobian of the measurement map. The benchmark measurements are linear, so this is `C`.
pub fn measurement_jacobian(model: &SystemModel) -> &DMatrix<f64> {
    &model.c
}

/// One extended Kalman step: propagate the mean through the RK4 step map and
/// the covariance through its finite-difference Jacobian.
pub fn ekf_step(state: &FilterState, model: &SystemModel, y: &DVector<f64>) -> Result<FilterState> {
    check_kind(model, FilterKind::Ekf)?;
    let mean = model.step(&state.mean)?;
    let f = step_jacobian(model, &state.mean)?;
    let mut cov = &f * &state.cov * f.transpose() + &model.q;
    symmetrize(&mut cov);
    update(mean, cov, measurement_jacobian(model), &model.r, y)
}

pub fn filter_step(kind: FilterKind, state: &FilterState, model: &SystemModel, y: &DVector<f64>) -> Result<FilterState> {
    match kind {
        FilterKind::Kf => kf_step(state, model, y),
        FilterKind::Ekf => ekf_step(state, model, y),
    }
}

/// Estimates `x̂^(1..T)` for one trajectory, starting from the default prior.
///
/// Only `traj.measurements` is read.
pub fn run_filter(model: &SystemModel, traj: &Trajectory, kind: FilterKind) -> Result<Vec<DVector<f64>>> {
    check_kind(model, kind)?;
    run_filter_from(model, &traj.measurements, kind, initial_state(model, None)?)
}

pub fn run_filter_from(
    model: &SystemModel,
    measurements: &[DVector<f64>],
    kind: FilterKind,
    init: FilterState,
) -> Result<Vec<DVector<f64>>> {
    let mut state = init;
    let mut out = Vec::with_capacity(measurements.len());
    for (t, y) in measurements.iter().enumerate() {
        state = filter_step(kind, &state, model, y).map_err(|e| match e {
            Error::IntegrationDiverged { .. } => Error::IntegrationDiverged { step: t + 1 },
            other => other,
        })?;
        out.push(state.mean.clone());
    }
    Ok(out)
}
