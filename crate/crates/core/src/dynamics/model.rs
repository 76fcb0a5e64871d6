use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::integrate::{rk4_step, zoh_discretize};
use crate::linalg::psd_factor;
use crate::{Error, Result};

/// Continuous-time vector field `x ↦ ẋ`.
pub type Drift = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Diagonal covariance used for every noise source of the benchmark systems.
pub const NOISE_VARIANCE: f64 = 0.01;

const GRAVITY: f64 = 9.8;
const PENDULUM_LENGTH: f64 = 1.0;
const PENDULUM_MASS: f64 = 2.0;
const PENDULUM_FRICTION: f64 = 0.9;

const SPRING_COUNT: usize = 10;
const SPRING_MASS: f64 = 10.0;
const SPRING_DAMPING: f64 = 6.0;
const SPRING_STIFFNESS: f64 = 800.0;

/// Damped pendulum: `(x₂, −(g/l) sin x₁ − (b/m) x₂)`.
pub fn pendulum_drift(x: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![
        x[1],
        -(GRAVITY / PENDULUM_LENGTH) * x[0].sin() - (PENDULUM_FRICTION / PENDULUM_MASS) * x[1],
    ])
}

/// Reversed Van der Pol oscillator: `(−x₂, x₁ + (x₁² − 1) x₂)`.
pub fn vdp_drift(x: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![-x[1], x[0] + (x[0] * x[0] - 1.0) * x[1]])
}

/// Axis-aligned box in ℝⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidModel("region bounds must be non-empty and equal length".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
            return Err(Error::InvalidModel("region bounds must be finite with lo <= hi".into()));
        }
        Ok(Region { lo, hi })
    }

    /// The cube `[lo, hi]ⁿ`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        Region {
            lo: vec![lo; n],
            hi: vec![hi; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn centroid(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)))
    }

    /// Per-axis variance of a uniform draw from the box, `(hi − lo)² / 12`.
    pub fn uniform_variances(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l).powi(2) / 12.0),
        )
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// True when the interiors do not overlap (shared faces are allowed).
    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(other.lo.iter().zip(&other.hi))
            .any(|((l1, h1), (l2, h2))| h1 <= l2 || h2 <= l1)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lo.iter().zip(&self.hi).map(|(l, h)| {
                let u: f64 = rng.random();
                l + (h - l) * u
            }),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    LinearZoh,
    NonlinearRk,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::LinearZoh => "linear",
            ModelKind::NonlinearRk => "nonlinear",
        }
    }
}

#[derive(Clone)]
pub enum Dynamics {
    /// `x⁺ = A_d x` with `A_d = exp(A dt)`.
    LinearZoh {
        a_cont: DMatrix<f64>,
        a_d: DMatrix<f64>,
    },
    /// `x⁺ = RK4(drift, x, dt)`.
    NonlinearRk { drift: Drift },
}

/// A noisy discrete-time system `x⁺ = f(x) + ω`, `y = C x + ν`.
///
/// All three benchmark systems measure a linear function of the state, so the
/// measurement map is stored as the matrix `C`.
#[derive(Clone)]
pub struct SystemModel {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub dt: f64,
    pub dynamics: Dynamics,
    pub c: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub p0: DMatrix<f64>,
    /// Box the per-sequence initial means are drawn from during training.
    pub init_region: Region,
    /// Box used for out-of-region testing, when the system defines one.
    pub oor_region: Option<Region>,
    /// Sequence length `T` used when none is given.
    pub default_length: usize,
    q_factor: DMatrix<f64>,
    r_factor: DMatrix<f64>,
    p0_factor: DMatrix<f64>,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("kind", &self.kind())
            .field("n", &self.n)
            .field("m", &self.m)
            .field("dt", &self.dt)
            .field("init_region", &self.init_region)
            .finish_non_exhaustive()
    }
}

impl SystemModel {
    /// Linear system `ẋ = A x` discretized by zero-order hold.
    pub fn linear(name: &str, a_cont: DMatrix<f64>, c: DMatrix<f64>, dt: f64) -> Result<Self> {
        let n = a_cont.nrows();
        if !a_cont.is_square() {
            return Err(Error::InvalidModel("A must be square".into()));
        }
        let a_d = zoh_discretize(&a_cont, dt)?;
        Self::assemble(name, n, dt, Dynamics::LinearZoh { a_cont, a_d }, c)
    }

    /// Linear system given directly by its discrete transition matrix.
    pub fn discrete_linear(name: &str, a_d: DMatrix<f64>, c: DMatrix<f64>, dt: f64) -> Result<Self> {
        let n = a_d.nrows();
        if !a_d.is_square() || a_d.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("A_d must be square and finite".into()));
        }
        let a_cont = DMatrix::zeros(n, n);
        Self::assemble(name, n, dt, Dynamics::LinearZoh { a_cont, a_d }, c)
    }

    /// Nonlinear system `ẋ = drift(x)` discretized by fixed-step RK4.
    pub fn nonlinear(name: &str, n: usize, drift: Drift, c: DMatrix<f64>, dt: f64) -> Result<Self> {
        Self::assemble(name, n, dt, Dynamics::NonlinearRk { drift }, c)
    }

    fn assemble(name: &str, n: usize, dt: f64, dynamics: Dynamics, c: DMatrix<f64>) -> Result<Self> {
        let m = c.nrows();
        if n == 0 || m == 0 {
            return Err(Error::InvalidModel("state and measurement dimensions must be >= 1".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidModel(format!("timestep must be positive, got {dt}")));
        }
        if c.ncols() != n {
            return Err(Error::InvalidModel(format!("C must be {m}x{n}, got {m}x{}", c.ncols())));
        }
        let q = DMatrix::identity(n, n) * NOISE_VARIANCE;
        let r = DMatrix::identity(m, m) * NOISE_VARIANCE;
        let p0 = DMatrix::identity(n, n) * NOISE_VARIANCE;
        Ok(SystemModel {
            name: name.to_string(),
            n,
            m,
            dt,
            dynamics,
            c,
            q_factor: psd_factor(&q)?,
            r_factor: psd_factor(&r)?,
            p0_factor: psd_factor(&p0)?,
            q,
            r,
            p0,
            init_region: Region::cube(n, -1.0, 1.0),
            oor_region: None,
            default_length: 100,
        })
    }

    /// Replace the noise covariances. Each must be symmetric positive semi-definite.
    pub fn with_covariances(mut self, q: DMatrix<f64>, r: DMatrix<f64>, p0: DMatrix<f64>) -> Result<Self> {
        let (n, m) = (self.n, self.m);
        if q.shape() != (n, n) || r.shape() != (m, m) || p0.shape() != (n, n) {
            return Err(Error::InvalidModel("covariance shapes do not match the model".into()));
        }
        self.q_factor = psd_factor(&q)?;
        self.r_factor = psd_factor(&r)?;
        self.p0_factor = psd_factor(&p0)?;
        self.q = q;
        self.r = r;
        self.p0 = p0;
        Ok(self)
    }

    /// Isotropic covariances `Q = q I`, `R = r I`, `P0 = p0 I`.
    pub fn with_noise(self, q: f64, r: f64, p0: f64) -> Result<Self> {
        let (n, m) = (self.n, self.m);
        self.with_covariances(
            DMatrix::identity(n, n) * q,
            DMatrix::identity(m, m) * r,
            DMatrix::identity(n, n) * p0,
        )
    }

    pub fn with_init_region(mut self, region: Region) -> Result<Self> {
        if region.dim() != self.n {
            return Err(Error::InvalidModel("initial region dimension must equal n".into()));
        }
        self.init_region = region;
        Ok(self)
    }

    pub fn with_oor_region(mut self, region: Region) -> Result<Self> {
        if region.dim() != self.n {
            return Err(Error::InvalidModel("out-of-region box dimension must equal n".into()));
        }
        self.oor_region = Some(region);
        Ok(self)
    }

    pub fn with_default_length(mut self, length: usize) -> Self {
        self.default_length = length;
        self
    }

    pub fn kind(&self) -> ModelKind {
        match self.dynamics {
            Dynamics::LinearZoh { .. } => ModelKind::LinearZoh,
            Dynamics::NonlinearRk { .. } => ModelKind::NonlinearRk,
        }
    }

    /// Deterministic part of the transition, `f(x)`.
    pub fn step(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.dynamics {
            Dynamics::LinearZoh { a_d, .. } => Ok(a_d * x),
            Dynamics::NonlinearRk { drift } => rk4_step(drift.as_ref(), x, self.dt),
        }
    }

    /// Noise-free measurement `C x`.
    pub fn measure(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.c * x
    }

    /// The diagonal scalars of `(Q, R, P0)` when all three are multiples of the identity.
    pub fn isotropic_noise(&self) -> Option<(f64, f64, f64)> {
        fn scalar(a: &DMatrix<f64>) -> Option<f64> {
            let s = a[(0, 0)];
            (*a == DMatrix::identity(a.nrows(), a.ncols()) * s).then_some(s)
        }
        Some((scalar(&self.q)?, scalar(&self.r)?, scalar(&self.p0)?))
    }

    pub(crate) fn q_factor(&self) -> &DMatrix<f64> {
        &self.q_factor
    }

    pub(crate) fn r_factor(&self) -> &DMatrix<f64> {
        &self.r_factor
    }

    pub(crate) fn p0_factor(&self) -> &DMatrix<f64> {
        &self.p0_factor
    }
}

/// Continuous-time matrix of a chain of `masses.len()` springs anchored at one end.
///
/// State order is positions followed by velocities. Spring `i` connects mass
/// `i − 1` (or the wall) to mass `i`, with stiffness `stiffness[i]` and damping `damping[i]`.
pub fn spring_chain_matrix(masses: &[f64], damping: &[f64], stiffness: &[f64]) -> DMatrix<f64> {
    let k = masses.len();
    assert!(damping.len() == k && stiffness.len() == k, "spring parameter lengths differ");
    let mut a = DMatrix::zeros(2 * k, 2 * k);
    for i in 0..k {
        a[(i, k + i)] = 1.0;
        // Spring i pulls mass i toward mass i-1; spring i+1 toward mass i+1.
        let mut couple = |coef: &[f64], offset: usize| {
            a[(k + i, offset + i)] -= coef[i] / masses[i];
            if i > 0 {
                a[(k + i, offset + i - 1)] += coef[i] / masses[i];
            }
            if i + 1 < k {
                a[(k + i, offset + i)] -= coef[i + 1] / masses[i];
                a[(k + i, offset + i + 1)] += coef[i + 1] / masses[i];
            }
        };
        couple(stiffness, 0);
        couple(damping, k);
    }
    a
}

/// Ten connected springs (`n = 20`, positions measured), ZOH with `Δt = 0.1`.
pub fn springs_model() -> SystemModel {
    let a = spring_chain_matrix(
        &[SPRING_MASS; SPRING_COUNT],
        &[SPRING_DAMPING; SPRING_COUNT],
        &[SPRING_STIFFNESS; SPRING_COUNT],
    );
    let mut c = DMatrix::zeros(SPRING_COUNT, 2 * SPRING_COUNT);
    for i in 0..SPRING_COUNT {
        c[(i, i)] = 1.0;
    }
    SystemModel::linear("springs", a, c, 0.1)
        .and_then(|s| s.with_oor_region(Region::cube(2 * SPRING_COUNT, 1.0, 1.5)))
        .expect("springs model is well formed")
        .with_default_length(500)
}

fn first_coordinate() -> DMatrix<f64> {
    DMatrix::from_row_slice(1, 2, &[1.0, 0.0])
}

/// Damped pendulum with angle measured, RK4 with `Δt = 0.01`.
pub fn pendulum_model() -> SystemModel {
    SystemModel::nonlinear("pendulum", 2, Arc::new(pendulum_drift), first_coordinate(), 0.01)
        .and_then(|s| s.with_init_region(Region::cube(2, -2.0, 2.0)))
        .and_then(|s| s.with_oor_region(Region::cube(2, 2.0, 2.5)))
        .expect("pendulum model is well formed")
        .with_default_length(4000)
}

/// Reversed Van der Pol oscillator with position measured, RK4 with `Δt = 0.1`.
pub fn vdp_model() -> SystemModel {
    SystemModel::nonlinear("vdp", 2, Arc::new(vdp_drift), first_coordinate(), 0.1)
        .and_then(|s| s.with_oor_region(Region::cube(2, 1.0, 1.5)))
        .expect("vdp model is well formed")
        .with_default_length(300)
}

/// Look up a benchmark system by name (`springs`, `pendulum`, `vdp`).
pub fn model_by_name(name: &str) -> Result<SystemModel> {
    match name {
        "springs" => Ok(springs_model()),
        "pendulum" => Ok(pendulum_model()),
        "vdp" => Ok(vdp_model()),
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}

/// Draw `factor · z` with `z ~ N(0, I)`.
pub(crate) fn gaussian<R: Rng>(factor: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let z = DVector::from_iterator(
        factor.ncols(),
        (0..factor.ncols()).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)),
    );
    factor * z
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn pendulum_drift_values() {
        assert_eq!(pendulum_drift(&v(&[0.0, 0.0])), v(&[0.0, 0.0]));
        let d = pendulum_drift(&v(&[FRAC_PI_2, 0.0]));
        assert_relative_eq!(d, v(&[0.0, -9.8]), epsilon = 1e-15);
        assert_relative_eq!(pendulum_drift(&v(&[0.0, 1.0])), v(&[1.0, -0.45]), epsilon = 1e-15);
    }

    #[test]
    fn vdp_drift_values() {
        assert_eq!(vdp_drift(&v(&[0.0, 0.0])), v(&[0.0, 0.0]));
        assert_eq!(vdp_drift(&v(&[1.0, 1.0])), v(&[-1.0, 1.0]));
        assert_eq!(vdp_drift(&v(&[2.0, -1.0])), v(&[1.0, -1.0]));
    }

    #[test]
    fn springs_shape() {
        let s = springs_model();
        assert_eq!((s.n, s.m, s.dt), (20, 10, 0.1));
        assert_eq!(s.kind(), ModelKind::LinearZoh);
        assert_eq!(s.default_length, 500);
        assert_eq!(s.init_region, Region::cube(20, -1.0, 1.0));
        assert_eq!(s.isotropic_noise(), Some((0.01, 0.01, 0.01)));
        for i in 0..10 {
            assert_eq!(s.c[(i, i)], 1.0);
            assert_eq!(s.c.row(i).sum(), 1.0);
        }
    }

    #[test]
    fn spring_chain_rows_follow_the_chain_equations() {
        let a = spring_chain_matrix(&[10.0; 10], &[6.0; 10], &[800.0; 10]);
        // first mass: -k1 x1 + k2 (x2 - x1)
        assert_eq!(a[(10, 0)], -160.0);
        assert_eq!(a[(10, 1)], 80.0);
        assert_eq!(a[(10, 10)], -1.2);
        assert_eq!(a[(10, 11)], 0.6);
        // last mass: -k10 (x10 - x9)
        assert_eq!(a[(19, 9)], -80.0);
        assert_eq!(a[(19, 8)], 80.0);
        assert_eq!(a[(19, 19)], -0.6);
        // kinematics
        assert_eq!(a[(3, 13)], 1.0);
        assert_eq!(a.rows(0, 10).sum(), 10.0);
    }

    #[test]
    fn nonlinear_presets() {
        let p = pendulum_model();
        assert_eq!((p.n, p.m, p.dt, p.default_length), (2, 1, 0.01, 4000));
        assert_eq!(p.init_region, Region::cube(2, -2.0, 2.0));
        assert_eq!(p.oor_region, Some(Region::cube(2, 2.0, 2.5)));
        let vdp = vdp_model();
        assert_eq!((vdp.n, vdp.m, vdp.dt, vdp.default_length), (2, 1, 0.1, 300));
        assert_eq!(vdp.oor_region, Some(Region::cube(2, 1.0, 1.5)));
        assert!(matches!(model_by_name("lorenz"), Err(Error::UnknownSystem(_))));
    }

    #[test]
    fn invalid_models_are_rejected() {
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let drift: Drift = Arc::new(vdp_drift);
        assert!(SystemModel::nonlinear("x", 2, drift.clone(), c.clone(), 0.0).is_err());
        assert!(SystemModel::nonlinear("x", 3, drift.clone(), c.clone(), 0.1).is_err());
        let m = SystemModel::nonlinear("x", 2, drift, c, 0.1).unwrap();
        assert!(m.clone().with_noise(-1.0, 0.01, 0.01).is_err());
        assert!(m.with_noise(0.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn region_helpers() {
        let r = Region::cube(2, -1.0, 1.0);
        assert_eq!(r.centroid(), v(&[0.0, 0.0]));
        assert_relative_eq!(r.uniform_variances(), v(&[1.0 / 3.0, 1.0 / 3.0]));
        assert!(r.contains(&v(&[0.5, -1.0])));
        assert!(!r.contains(&v(&[1.5, 0.0])));
        assert!(r.is_disjoint(&Region::cube(2, 1.0, 2.0)));
        assert!(!r.is_disjoint(&Region::cube(2, 0.5, 2.0)));
        assert!(Region::new(vec![1.0], vec![0.0]).is_err());
    }
}
