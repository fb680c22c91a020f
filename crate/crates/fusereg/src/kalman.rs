//! Kalman filtering: prediction, measurement update, whole-trajectory runs,
//! and the extended variant for nonlinear systems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lds_core::{LinearSystem, NonlinearSystem};
use crate::linalg::{solve_spd, symmetrize, MAX_CONDITION};

/// Filter mean and covariance at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub x: DVector<f64>,
    pub p: DMatrix<f64>,
}

impl KalmanState {
    pub fn new(x: DVector<f64>, p: DMatrix<f64>) -> Result<Self> {
        if p.nrows() != x.len() || p.ncols() != x.len() {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be {}x{}, got {}x{}",
                x.len(),
                x.len(),
                p.nrows(),
                p.ncols()
            )));
        }
        Ok(KalmanState { x, p })
    }

    /// Diffuse default initialization: zero mean, covariance `1e3 I`.
    pub fn default_init(state_dim: usize) -> Self {
        KalmanState {
            x: DVector::zeros(state_dim),
            p: DMatrix::identity(state_dim, state_dim) * 1e3,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// One filter step: the prior produced by prediction, the posterior after
/// assimilating the measurement, and the gain that was applied.
#[derive(Debug, Clone)]
pub struct KfStep {
    pub prior: KalmanState,
    pub posterior: KalmanState,
    pub gain: DMatrix<f64>,
}

/// Full filtering history over a measurement sequence. Row `i` of `states`
/// is the posterior mean after assimilating measurement row `i`.
#[derive(Debug, Clone)]
pub struct KfRun {
    pub states: DMatrix<f64>,
    pub covariances: Vec<DMatrix<f64>>,
    pub priors: Vec<KalmanState>,
}

/// Propagates the posterior through the dynamics:
/// `x_bar = F x`, `P_bar = F P F' + Q`.
pub fn kf_predict(state: &KalmanState, f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<KalmanState> {
    let k = state.dim();
    if f.shape() != (k, k) || q.shape() != (k, k) {
        return Err(Error::DimensionMismatch(format!(
            "F and Q must be {k}x{k} for a state of dimension {k}"
        )));
    }
    let x_bar = f * &state.x;
    let p_bar = symmetrize(&(f * &state.p * f.transpose() + q));
    KalmanState::new(x_bar, p_bar)
}

/// Gain `K = P_bar H' (H P_bar H' + R)^{-1}`, computed by solving against the
/// innovation covariance rather than inverting it.
pub fn kalman_gain(
    p_bar: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let s = symmetrize(&(h * p_bar * h.transpose() + r));
    let k_t = solve_spd(&s, &(h * p_bar)).map_err(|ill| Error::SingularInnovation {
        cond: ill.cond,
        limit: MAX_CONDITION,
    })?;
    Ok(k_t.transpose())
}

/// Assimilates one measurement into a prior:
/// `x = x_bar + K (z - H x_bar)`, `P = (I - K H) P_bar`.
pub fn kf_update(
    prior: &KalmanState,
    z: &DVector<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<(KalmanState, DMatrix<f64>)> {
    let k_dim = prior.dim();
    if h.ncols() != k_dim {
        return Err(Error::DimensionMismatch(format!(
            "H has {} columns but the state dimension is {}",
            h.ncols(),
            k_dim
        )));
    }
    if z.len() != h.nrows() || r.shape() != (h.nrows(), h.nrows()) {
        return Err(Error::DimensionMismatch(format!(
            "measurement of length {} does not match H ({}x{}) and R ({}x{})",
            z.len(),
            h.nrows(),
            h.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    let gain = kalman_gain(&prior.p, h, r)?;
    let x = &prior.x + &gain * (z - h * &prior.x);
    let eye = DMatrix::identity(k_dim, k_dim);
    let p = symmetrize(&((eye - &gain * h) * &prior.p));
    Ok((KalmanState::new(x, p)?, gain))
}

/// One predict-update cycle against a linear system.
pub fn kf_step(state: &KalmanState, sys: &LinearSystem, z: &DVector<f64>) -> Result<KfStep> {
    let prior = kf_predict(state, &sys.f, &sys.q)?;
    let (posterior, gain) = kf_update(&prior, z, &sys.h, &sys.r)?;
    Ok(KfStep {
        prior,
        posterior,
        gain,
    })
}

/// Filters a whole measurement sequence (rows of `measurements`). Errors are
/// tagged with the 1-based step at which they occurred.
pub fn run_kf(
    sys: &LinearSystem,
    init: &KalmanState,
    measurements: &DMatrix<f64>,
) -> Result<KfRun> {
    let report = sys.validate();
    if !report.is_ok() {
        return Err(Error::InvalidSystem(report.problems));
    }
    if init.dim() != sys.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has dimension {} but the system has {}",
            init.dim(),
            sys.state_dim()
        )));
    }
    if measurements.ncols() != sys.sensor_dim() {
        return Err(Error::DimensionMismatch(format!(
            "measurements have {} columns but the system has {} sensors",
            measurements.ncols(),
            sys.sensor_dim()
        )));
    }
    let t = measurements.nrows();
    let mut states = DMatrix::zeros(t, sys.state_dim());
    let mut covariances = Vec::with_capacity(t);
    let mut priors = Vec::with_capacity(t);
    let mut current = init.clone();
    for i in 0..t {
        let z = DVector::from_iterator(sys.sensor_dim(), measurements.row(i).iter().cloned());
        let step = kf_step(&current, sys, &z).map_err(|e| e.at_step(i + 1))?;
        states.row_mut(i).copy_from(&step.posterior.x.transpose());
        covariances.push(step.posterior.p.clone());
        priors.push(step.prior);
        current = step.posterior;
    }
    Ok(KfRun {
        states,
        covariances,
        priors,
    })
}

/// How the extended filter forms its predicted mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictMode {
    /// `x_bar = f(x)`: propagate through the nonlinear dynamics.
    #[default]
    Nonlinear,
    /// `x_bar = Df(x) x`: propagate through the linearization instead.
    Linearized,
}

/// One extended predict-update cycle. The covariance always propagates
/// through the Jacobians; `mode` only selects how the mean is predicted.
pub fn ekf_step(
    state: &KalmanState,
    sys: &NonlinearSystem,
    z: &DVector<f64>,
    mode: PredictMode,
) -> Result<KfStep> {
    if state.dim() != sys.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has dimension {} but the system has {}",
            state.dim(),
            sys.state_dim()
        )));
    }
    if z.len() != sys.sensor_dim() {
        return Err(Error::DimensionMismatch(format!(
            "measurement has length {} but the system has {} sensors",
            z.len(),
            sys.sensor_dim()
        )));
    }
    let f_jac = (sys.f_jacobian)(&state.x);
    let x_bar = match mode {
        PredictMode::Nonlinear => (sys.f)(&state.x),
        PredictMode::Linearized => &f_jac * &state.x,
    };
    let p_bar = symmetrize(&(&f_jac * &state.p * f_jac.transpose() + &sys.q));
    let h_jac = (sys.h_jacobian)(&x_bar);
    let gain = kalman_gain(&p_bar, &h_jac, &sys.r)?;
    let x = &x_bar + &gain * (z - (sys.h)(&x_bar));
    let eye = DMatrix::identity(state.dim(), state.dim());
    let p = symmetrize(&((eye - &gain * &h_jac) * &p_bar));
    Ok(KfStep {
        prior: KalmanState::new(x_bar, p_bar)?,
        posterior: KalmanState::new(x, p)?,
        gain,
    })
}
