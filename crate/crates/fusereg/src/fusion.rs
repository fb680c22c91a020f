//! Sensor fusion: the generalized-least-squares estimator, measurement
//! augmentation that reproduces the Kalman update, and the residual
//! covariance builders used by the regression equivalences.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kalman::PredictMode;
use crate::kalman::{KalmanState, KfRun};
use crate::lds_core::{LinearSystem, NonlinearSystem};
use crate::linalg::{solve_spd, symmetrize};

/// Fuses one round of sensor readings into a state estimate
/// `(H' R^{-1} H)^{-1} H' R^{-1} z`, solving against `R` and the Gram matrix
/// instead of inverting either.
pub fn sf_estimate(h: &DMatrix<f64>, r: &DMatrix<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
    let (d, k) = h.shape();
    if z.len() != d || r.shape() != (d, d) {
        return Err(Error::DimensionMismatch(format!(
            "H is {d}x{k} but z has length {} and R is {}x{}",
            z.len(),
            r.nrows(),
            r.ncols()
        )));
    }
    // One factorization of R serves both H and z.
    let mut rhs = DMatrix::zeros(d, k + 1);
    rhs.view_mut((0, 0), (d, k)).copy_from(h);
    rhs.view_mut((0, k), (d, 1)).copy_from(z);
    let w = solve_spd(r, &rhs).map_err(|ill| {
        Error::SingularR(format!(
            "measurement covariance is singular or ill-conditioned (condition {:.3e}); \
             consider shrinking it toward the identity",
            ill.cond
        ))
    })?;
    let gram = symmetrize(&(h.transpose() * w.view((0, 0), (d, k))));
    let target = h.transpose() * w.view((0, k), (d, 1));
    let x = solve_spd(&gram, &target).map_err(|ill| Error::SingularGram { cond: ill.cond })?;
    Ok(x.column(0).into_owned())
}

/// Inverse of the fused Gram matrix `(H' R^{-1} H)^{-1}`, the covariance of
/// [`sf_estimate`], obtained by factor-and-solve against the identity.
pub fn sf_covariance(h: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (d, k) = h.shape();
    if r.shape() != (d, d) {
        return Err(Error::DimensionMismatch(format!(
            "H is {d}x{k} but R is {}x{}",
            r.nrows(),
            r.ncols()
        )));
    }
    let w = solve_spd(r, h).map_err(|ill| {
        Error::SingularR(format!(
            "measurement covariance is singular or ill-conditioned (condition {:.3e}); \
             consider shrinking it toward the identity",
            ill.cond
        ))
    })?;
    let gram = symmetrize(&(h.transpose() * w));
    let cov = solve_spd(&gram, &DMatrix::identity(k, k))
        .map_err(|ill| Error::SingularGram { cond: ill.cond })?;
    Ok(symmetrize(&cov))
}

/// Augmented measurement model that treats the predicted state as `k` extra
/// sensor readings: `z~ = (z, x_bar)`, `H~ = [H; I]`,
/// `R~ = blockdiag(R, P_bar)`.
pub fn augment_linear(
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
    x_bar: &DVector<f64>,
    p_bar: &DMatrix<f64>,
    z: &DVector<f64>,
) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let (d, k) = h.shape();
    let mut h_aug = DMatrix::zeros(d + k, k);
    h_aug.view_mut((0, 0), (d, k)).copy_from(h);
    h_aug
        .view_mut((d, 0), (k, k))
        .copy_from(&DMatrix::identity(k, k));
    let mut r_aug = DMatrix::zeros(d + k, d + k);
    r_aug.view_mut((0, 0), (d, d)).copy_from(r);
    r_aug.view_mut((d, d), (k, k)).copy_from(p_bar);
    let mut z_aug = DVector::zeros(d + k);
    z_aug.rows_mut(0, d).copy_from(z);
    z_aug.rows_mut(d, k).copy_from(x_bar);
    (h_aug, r_aug, z_aug)
}

/// Filters a measurement sequence by fusing, at every step, the current
/// readings with the predicted state treated as extra sensors. Produces the
/// same posterior means and covariances as the Kalman filter.
pub fn run_augmented_sf(
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
    let k = sys.state_dim();
    let mut states = DMatrix::zeros(t, k);
    let mut covariances = Vec::with_capacity(t);
    let mut priors = Vec::with_capacity(t);
    let mut current = init.clone();
    for i in 0..t {
        let z = DVector::from_iterator(sys.sensor_dim(), measurements.row(i).iter().cloned());
        let x_bar = &sys.f * &current.x;
        let p_bar = symmetrize(&(&sys.f * &current.p * sys.f.transpose() + &sys.q));
        let (h_aug, r_aug, z_aug) = augment_linear(&sys.h, &sys.r, &x_bar, &p_bar, &z);
        let x = sf_estimate(&h_aug, &r_aug, &z_aug).map_err(|e| e.at_step(i + 1))?;
        let p = sf_covariance(&h_aug, &r_aug).map_err(|e| e.at_step(i + 1))?;
        states.row_mut(i).copy_from(&x.transpose());
        covariances.push(p.clone());
        priors.push(KalmanState::new(x_bar, p_bar)?);
        current = KalmanState::new(x, p)?;
    }
    Ok(KfRun {
        states,
        covariances,
        priors,
    })
}

/// Prior and posterior of one fused filter step.
#[derive(Debug, Clone)]
pub struct SfStep {
    pub prior: KalmanState,
    pub posterior: KalmanState,
}

/// Extended fused step for a nonlinear system. The measurement map is
/// linearized at the predicted mean and the readings are shifted by
/// `H_lin x_bar - h(x_bar)` so the linear fusion applies; `mode` selects how
/// the mean is predicted, matching the extended Kalman conventions.
pub fn esf_step(
    state: &KalmanState,
    sys: &NonlinearSystem,
    z: &DVector<f64>,
    mode: PredictMode,
) -> Result<SfStep> {
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
    let h_lin = (sys.h_jacobian)(&x_bar);
    let z_shifted = z + &h_lin * &x_bar - (sys.h)(&x_bar);
    let (h_aug, r_aug, z_aug) = augment_linear(&h_lin, &sys.r, &x_bar, &p_bar, &z_shifted);
    let x = sf_estimate(&h_aug, &r_aug, &z_aug)?;
    let p = sf_covariance(&h_aug, &r_aug)?;
    Ok(SfStep {
        prior: KalmanState::new(x_bar, p_bar)?,
        posterior: KalmanState::new(x, p)?,
    })
}

/// Uncentered covariance of the sensor residuals,
/// `(1/t) sum_i (z_i - H x_i)(z_i - H x_i)'`, over rows of `measurements`
/// and `states`. The result is exactly symmetric.
pub fn empirical_covariance(
    measurements: &DMatrix<f64>,
    states: &DMatrix<f64>,
    h: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let t = measurements.nrows();
    if t == 0 {
        return Err(Error::EmptyHistory);
    }
    if states.nrows() != t {
        return Err(Error::DimensionMismatch(
            "measurements and states must cover the same steps".into(),
        ));
    }
    if h.shape() != (measurements.ncols(), states.ncols()) {
        return Err(Error::DimensionMismatch(format!(
            "H must be {}x{}, got {}x{}",
            measurements.ncols(),
            states.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    let resid = measurements - states * h.transpose();
    Ok(symmetrize(&(resid.transpose() * &resid / t as f64)))
}

/// Matrix the empirical covariance is shrunk toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShrinkageTarget {
    /// The full identity.
    Identity,
    /// `blockdiag(I_dim, 0)`: identity on the leading `dim` sensors, zero on
    /// the rest. Used when trailing pseudo-sensors are exact and must not
    /// receive artificial noise.
    PartialIdentity { dim: usize },
}

/// Convex shrinkage `alpha * emp + (1 - alpha) * I` toward the identity.
/// Requires `0 < alpha <= 1`; `alpha = 1` returns the input unchanged.
pub fn shrunk_covariance(emp: &DMatrix<f64>, alpha: f64) -> Result<DMatrix<f64>> {
    shrunk_covariance_toward(emp, alpha, ShrinkageTarget::Identity)
}

/// Convex shrinkage toward an explicit target.
pub fn shrunk_covariance_toward(
    emp: &DMatrix<f64>,
    alpha: f64,
    target: ShrinkageTarget,
) -> Result<DMatrix<f64>> {
    if emp.nrows() != emp.ncols() {
        return Err(Error::DimensionMismatch("covariance must be square".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let d = emp.nrows();
    let target_matrix = match target {
        ShrinkageTarget::Identity => DMatrix::identity(d, d),
        ShrinkageTarget::PartialIdentity { dim } => {
            if dim > d {
                return Err(Error::DimensionMismatch(format!(
                    "partial identity of size {dim} does not fit a {d}x{d} covariance"
                )));
            }
            DMatrix::from_fn(d, d, |i, j| if i == j && i < dim { 1.0 } else { 0.0 })
        }
    };
    Ok(emp * alpha + target_matrix * (1.0 - alpha))
}

/// Appends `k` exact pseudo-sensors to a measurement model: the map gains
/// identity rows and every measurement row gains `k` zero readings.
pub fn zero_pad(
    h: &DMatrix<f64>,
    measurements: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (d, k) = h.shape();
    if measurements.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "measurements have {} columns but H has {} rows",
            measurements.ncols(),
            d
        )));
    }
    let mut h_aug = DMatrix::zeros(d + k, k);
    h_aug.view_mut((0, 0), (d, k)).copy_from(h);
    h_aug
        .view_mut((d, 0), (k, k))
        .copy_from(&DMatrix::identity(k, k));
    let t = measurements.nrows();
    let mut z_aug = DMatrix::zeros(t, d + k);
    z_aug.view_mut((0, 0), (t, d)).copy_from(measurements);
    Ok((h_aug, z_aug))
}
