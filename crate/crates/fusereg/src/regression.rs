//! Regressions over sensor histories whose fitted combinations reproduce the
//! fusion estimators: constrained least squares, its ridge and lasso
//! penalizations, and their unconstrained counterparts.
//!
//! Data conventions: `Z` is `t x d` (one row of sensor readings per step),
//! `X` is `t x k` (the states), and column `j` of the coefficient matrix `B`
//! predicts state `j` as `z' b_j`. Constrained kinds impose `H' b_j = e_j`.
//! Penalized objectives are `(1/t) |X_j - Z b|^2 + lambda * penalty`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_spd, solve_square, GuardedLu};

/// Coefficients below this magnitude count as zero when reading the active
/// set off a lasso fit.
const ZERO_TOL: f64 = 1e-8;

/// Which objective produced a [`RegressionFit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    ConstrainedLs,
    ConstrainedRidge,
    ConstrainedLasso,
    Ridge,
    Lasso,
}

impl FitKind {
    pub fn is_constrained(self) -> bool {
        matches!(
            self,
            FitKind::ConstrainedLs | FitKind::ConstrainedRidge | FitKind::ConstrainedLasso
        )
    }

    pub fn is_lasso(self) -> bool {
        matches!(self, FitKind::ConstrainedLasso | FitKind::Lasso)
    }
}

/// Solver health for one fit. Smooth kinds always converge in one solve;
/// iterative fits report their final residuals and may be returned
/// unconverged with `converged = false` rather than as an error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Largest optimality-condition violation at the returned coefficients.
    pub kkt_residual: f64,
}

/// Fitted coefficients for all state columns, with the multipliers of the
/// `H' b_j = e_j` constraints when applicable.
///
/// Dual scaling: for `constrained-ls` and `constrained-ridge` the stored
/// duals satisfy `Z'(Z b_j - X_j) + t lambda b_j + H u_j = 0`; for
/// `constrained-lasso` they satisfy
/// `(2/t) Z'(Z b_j - X_j) + lambda w_j s_j + H u_j = 0` with `s_j` a
/// subgradient of the l1 norm.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub kind: FitKind,
    /// `d x k`; column `j` combines the sensors into state `j`.
    pub b_hat: DMatrix<f64>,
    /// Penalty strength per state column.
    pub lambdas: Vec<f64>,
    /// `d x k` nonnegative entries; `None` means every coefficient weighted 1.
    pub penalty_weights: Option<DMatrix<f64>>,
    /// `k x k`; column `j` is the multiplier of `H' b_j = e_j`.
    pub duals: Option<DMatrix<f64>>,
    pub diagnostics: FitDiagnostics,
}

impl RegressionFit {
    pub fn sensor_dim(&self) -> usize {
        self.b_hat.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.b_hat.ncols()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&FitDto::from(self)).expect("fit serialization cannot fail")
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let dto: FitDto =
            serde_json::from_str(json).map_err(|e| Error::Schema(format!("fit JSON: {e}")))?;
        dto.into_fit()
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixDto {
    rows: usize,
    cols: usize,
    /// Row-major entries.
    data: Vec<f64>,
}

impl MatrixDto {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        MatrixDto {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    fn into_matrix(self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Schema(format!(
                "matrix payload has {} entries for a {}x{} shape",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Serialize, Deserialize)]
struct FitDto {
    kind: FitKind,
    lambdas: Vec<f64>,
    b_hat: MatrixDto,
    penalty_weights: Option<MatrixDto>,
    duals: Option<MatrixDto>,
    diagnostics: FitDiagnostics,
}

impl From<&RegressionFit> for FitDto {
    fn from(fit: &RegressionFit) -> Self {
        FitDto {
            kind: fit.kind,
            lambdas: fit.lambdas.clone(),
            b_hat: MatrixDto::from_matrix(&fit.b_hat),
            penalty_weights: fit.penalty_weights.as_ref().map(MatrixDto::from_matrix),
            duals: fit.duals.as_ref().map(MatrixDto::from_matrix),
            diagnostics: fit.diagnostics.clone(),
        }
    }
}

impl FitDto {
    fn into_fit(self) -> Result<RegressionFit> {
        let b_hat = self.b_hat.into_matrix()?;
        if self.lambdas.len() != b_hat.ncols() {
            return Err(Error::Schema(format!(
                "{} lambdas for {} state columns",
                self.lambdas.len(),
                b_hat.ncols()
            )));
        }
        Ok(RegressionFit {
            kind: self.kind,
            lambdas: self.lambdas,
            penalty_weights: self
                .penalty_weights
                .map(MatrixDto::into_matrix)
                .transpose()?,
            duals: self.duals.map(MatrixDto::into_matrix).transpose()?,
            b_hat,
            diagnostics: self.diagnostics,
        })
    }
}

/// Knobs of the iterative lasso solver. The defaults match the tolerances
/// the optimality tests pin down; loosen `tol` only for throwaway fits
/// inside a grid search.
#[derive(Debug, Clone)]
pub struct LassoSettings {
    /// Augmented-Lagrangian penalty. The splitting converges for any
    /// positive value; this also scales the cached factorization.
    pub rho: f64,
    /// Absolute bound both residual norms must reach.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for LassoSettings {
    fn default() -> Self {
        LassoSettings {
            rho: 1.0,
            tol: 1e-8,
            max_iters: 10_000,
        }
    }
}

fn check_training(z: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<(usize, usize, usize)> {
    let t = z.nrows();
    if t == 0 {
        return Err(Error::EmptyHistory);
    }
    if x.nrows() != t {
        return Err(Error::DimensionMismatch(format!(
            "Z has {} rows but X has {}",
            t,
            x.nrows()
        )));
    }
    let (d, k) = (z.ncols(), x.ncols());
    if d == 0 || k == 0 {
        return Err(Error::DimensionMismatch(
            "need at least one sensor column and one state column".into(),
        ));
    }
    Ok((t, d, k))
}

fn check_constraint_map(h: &DMatrix<f64>, d: usize, k: usize) -> Result<()> {
    if h.shape() != (d, k) {
        return Err(Error::DimensionMismatch(format!(
            "constraint map must be {d}x{k}, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidLambda(lambda));
    }
    Ok(())
}

fn check_weights(weights: Option<&DMatrix<f64>>, d: usize, k: usize) -> Result<()> {
    if let Some(w) = weights {
        if w.shape() != (d, k) {
            return Err(Error::DimensionMismatch(format!(
                "penalty weights must be {d}x{k}, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(
                "penalty weights must be finite and nonnegative".into(),
            ));
        }
    }
    Ok(())
}

/// Smallest penalty at which an unconstrained, unit-weight lasso zeroes every
/// coefficient: `(2/t) max |Z'X|`.
pub fn lambda_max(z: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<f64> {
    let (t, _, _) = check_training(z, x)?;
    Ok(2.0 / t as f64 * (z.transpose() * x).abs().max())
}

/// Least squares of each state column on the sensors subject to
/// `H' b_j = e_j`, solved through the saddle-point optimality system.
pub fn fit_constrained_ls(
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
    h: &DMatrix<f64>,
) -> Result<RegressionFit> {
    fit_smooth_constrained(z, x, h, 0.0, FitKind::ConstrainedLs)
}

/// Adds `lambda |b_j|^2` to the constrained objective.
pub fn fit_constrained_ridge(
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
    h: &DMatrix<f64>,
    lambda: f64,
) -> Result<RegressionFit> {
    check_lambda(lambda)?;
    fit_smooth_constrained(z, x, h, lambda, FitKind::ConstrainedRidge)
}

fn fit_smooth_constrained(
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
    h: &DMatrix<f64>,
    lambda: f64,
    kind: FitKind,
) -> Result<RegressionFit> {
    let (t, d, k) = check_training(z, x)?;
    check_constraint_map(h, d, k)?;
    let mut kkt = DMatrix::zeros(d + k, d + k);
    let gram = z.transpose() * z + DMatrix::identity(d, d) * (t as f64 * lambda);
    kkt.view_mut((0, 0), (d, d)).copy_from(&gram);
    kkt.view_mut((0, d), (d, k)).copy_from(h);
    kkt.view_mut((d, 0), (k, d)).copy_from(&h.transpose());
    let mut rhs = DMatrix::zeros(d + k, k);
    rhs.view_mut((0, 0), (d, k)).copy_from(&(z.transpose() * x));
    rhs.view_mut((d, 0), (k, k))
        .copy_from(&DMatrix::identity(k, k));
    let sol = solve_square(&kkt, &rhs).map_err(|ill| Error::SingularKkt { cond: ill.cond })?;
    let b_hat = sol.view((0, 0), (d, k)).clone_owned();
    let duals = sol.view((d, 0), (k, k)).clone_owned();
    let mut fit = RegressionFit {
        kind,
        b_hat,
        lambdas: vec![lambda; k],
        penalty_weights: None,
        duals: Some(duals),
        diagnostics: FitDiagnostics {
            iterations: 1,
            converged: true,
            primal_residual: 0.0,
            dual_residual: 0.0,
            kkt_residual: 0.0,
        },
    };
    let (stationarity, constraint) = certificate(&fit, z, x, Some(h))?;
    fit.diagnostics.kkt_residual = stationarity.max(constraint);
    Ok(fit)
}

/// Unconstrained ridge `(1/t) |X_j - Z b|^2 + lambda |b|^2`. With
/// `lambda = 0` this is plain least squares and fails on an ill-conditioned
/// Gram matrix.
pub fn fit_ridge(z: &DMatrix<f64>, x: &DMatrix<f64>, lambda: f64) -> Result<RegressionFit> {
    check_lambda(lambda)?;
    let (t, d, k) = check_training(z, x)?;
    let gram = z.transpose() * z + DMatrix::identity(d, d) * (t as f64 * lambda);
    let b_hat = solve_spd(&gram, &(z.transpose() * x))
        .map_err(|ill| Error::SingularGram { cond: ill.cond })?;
    let mut fit = RegressionFit {
        kind: FitKind::Ridge,
        b_hat,
        lambdas: vec![lambda; k],
        penalty_weights: None,
        duals: None,
        diagnostics: FitDiagnostics {
            iterations: 1,
            converged: true,
            primal_residual: 0.0,
            dual_residual: 0.0,
            kkt_residual: 0.0,
        },
    };
    let (stationarity, _) = certificate(&fit, z, x, None)?;
    fit.diagnostics.kkt_residual = stationarity;
    Ok(fit)
}

/// Constrained lasso
/// `(1/t) |X_j - Z b|^2 + lambda |w_j . b|_1` subject to `H' b_j = e_j`,
/// solved by splitting with default settings.
pub fn fit_constrained_lasso(
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
    h: &DMatrix<f64>,
    lambda: f64,
    weights: Option<&DMatrix<f64>>,
) -> Result<RegressionFit> {
    let mut fits =
        fit_constrained_lasso_path(z, x, h, &[lambda], weights, &LassoSettings::default())?;
    Ok(fits.pop().expect("one lambda produces one fit"))
}

/// Constrained lasso along a penalty path, warm-starting each fit from the
/// previous one in the given order. Pass the grid largest-first so the warm
/// starts track the solution as it densifies. The optimality system is
/// factored once and reused across the whole path.
pub fn fit_constrained_lasso_path(
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
    h: &DMatrix<f64>,
    lambdas: &[f64],
    weights: Option<&DMatrix<f64>>,
    settings: &LassoSettings,
) -> Result<Vec<RegressionFit>> {
    let (_, d, k) = check_training(z, x)?;
    check_constraint_map(h, d, k)?;
    admm_path(
        z,
        x,
        Some(h),
        lambdas,
        weights,
        settings,
        FitKind::ConstrainedLasso,
    )
}

/// Unconstrained lasso with default settings.
pub fn fit_lasso(
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
    lambda: f64,
    weights: Option<&DMatrix<f64>>,
) -> Result<RegressionFit> {
    let mut fits = fit_lasso_path(z, x, &[lambda], weights, &LassoSettings::default())?;
    Ok(fits.pop().expect("one lambda produces one fit"))
}

/// Unconstrained lasso along a penalty path with warm starts, largest-first.
pub fn fit_lasso_path(
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
    lambdas: &[f64],
    weights: Option<&DMatrix<f64>>,
    settings: &LassoSettings,
) -> Result<Vec<RegressionFit>> {
    check_training(z, x)?;
    admm_path(z, x, None, lambdas, weights, settings, FitKind::Lasso)
}

fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

struct ColumnState {
    v: DVector<f64>,
    u: DVector<f64>,
}

struct ColumnResult {
    b: DVector<f64>,
    mu: Option<DVector<f64>>,
    iterations: usize,
    converged: bool,
    primal: f64,
    dual: f64,
}

/// Shared splitting solver. The quadratic subproblem matrix
/// `[(2/t) Z'Z + rho I, H; H', 0]` (or its top-left block alone when
/// unconstrained) does not depend on lambda, so one factorization serves
/// every column and every grid point.
fn admm_path(
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
    h: Option<&DMatrix<f64>>,
    lambdas: &[f64],
    weights: Option<&DMatrix<f64>>,
    settings: &LassoSettings,
    kind: FitKind,
) -> Result<Vec<RegressionFit>> {
    let (t, d, k) = check_training(z, x)?;
    check_weights(weights, d, k)?;
    for &lambda in lambdas {
        check_lambda(lambda)?;
    }
    if lambdas.is_empty() {
        return Ok(Vec::new());
    }
    if !(settings.rho > 0.0 && settings.rho.is_finite()) {
        return Err(Error::Config(format!(
            "splitting penalty rho = {} must be positive",
            settings.rho
        )));
    }
    let scale = 2.0 / t as f64;
    let gram_scaled = z.transpose() * z * scale + DMatrix::identity(d, d) * settings.rho;
    let zt_x_scaled = z.transpose() * x * scale;
    let n = if h.is_some() { d + k } else { d };
    let mut system = DMatrix::zeros(n, n);
    system.view_mut((0, 0), (d, d)).copy_from(&gram_scaled);
    if let Some(h) = h {
        system.view_mut((0, d), (d, k)).copy_from(h);
        system.view_mut((d, 0), (k, d)).copy_from(&h.transpose());
    }
    let lu = GuardedLu::new(&system).map_err(|ill| Error::SingularKkt { cond: ill.cond })?;

    let mut states: Vec<ColumnState> = (0..k)
        .map(|_| ColumnState {
            v: DVector::zeros(d),
            u: DVector::zeros(d),
        })
        .collect();
    let mut fits = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut b_hat = DMatrix::zeros(d, k);
        let mut duals = h.map(|_| DMatrix::zeros(k, k));
        let mut iterations = 0;
        let mut converged = true;
        let mut primal: f64 = 0.0;
        let mut dual: f64 = 0.0;
        for (j, warm) in states.iter_mut().enumerate() {
            let w_col: DVector<f64> = match weights {
                Some(w) => w.column(j).into_owned(),
                None => DVector::from_element(d, 1.0),
            };
            let result = admm_column(
                &lu,
                &zt_x_scaled.column(j).into_owned(),
                h.map(|_| j),
                d,
                k,
                lambda,
                &w_col,
                settings,
                warm,
            )?;
            b_hat.set_column(j, &result.b);
            if let (Some(duals), Some(mu)) = (duals.as_mut(), result.mu.as_ref()) {
                duals.set_column(j, mu);
            }
            iterations = iterations.max(result.iterations);
            converged &= result.converged;
            primal = primal.max(result.primal);
            dual = dual.max(result.dual);
        }
        let mut fit = RegressionFit {
            kind,
            b_hat,
            lambdas: vec![lambda; k],
            penalty_weights: weights.cloned(),
            duals,
            diagnostics: FitDiagnostics {
                iterations,
                converged,
                primal_residual: primal,
                dual_residual: dual,
                kkt_residual: 0.0,
            },
        };
        let (stationarity, constraint) = certificate(&fit, z, x, h)?;
        fit.diagnostics.kkt_residual = stationarity.max(constraint);
        fits.push(fit);
    }
    Ok(fits)
}

#[allow(clippy::too_many_arguments)]
fn admm_column(
    lu: &GuardedLu,
    zt_x_col_scaled: &DVector<f64>,
    constrained_col: Option<usize>,
    d: usize,
    k: usize,
    lambda: f64,
    w_col: &DVector<f64>,
    settings: &LassoSettings,
    state: &mut ColumnState,
) -> Result<ColumnResult> {
    let rho = settings.rho;
    let n = if constrained_col.is_some() { d + k } else { d };
    let mut rhs = DVector::zeros(n);
    if let Some(j) = constrained_col {
        rhs[d + j] = 1.0;
    }
    let mut b = state.v.clone();
    let mut mu = constrained_col.map(|_| DVector::zeros(k));
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < settings.max_iters {
        iterations += 1;
        for i in 0..d {
            rhs[i] = zt_x_col_scaled[i] + rho * (state.v[i] - state.u[i]);
        }
        let sol = lu
            .solve(&rhs)
            .map_err(|ill| Error::SingularKkt { cond: ill.cond })?;
        b = sol.rows(0, d).into_owned();
        if let Some(mu) = mu.as_mut() {
            *mu = sol.rows(d, k).into_owned();
        }
        let mut v_new = DVector::zeros(d);
        for i in 0..d {
            v_new[i] = soft_threshold(b[i] + state.u[i], lambda * w_col[i] / rho);
        }
        dual = rho * (&v_new - &state.v).norm();
        primal = (&b - &v_new).norm();
        for i in 0..d {
            state.u[i] += b[i] - v_new[i];
        }
        state.v = v_new;
        if primal < settings.tol && dual < settings.tol {
            converged = true;
            break;
        }
    }
    Ok(ColumnResult {
        b,
        mu,
        iterations,
        converged,
        primal,
        dual,
    })
}

/// Prediction `B' z` for one round of sensor readings.
pub fn predict(fit: &RegressionFit, z: &DVector<f64>) -> Result<DVector<f64>> {
    if z.len() != fit.sensor_dim() {
        return Err(Error::DimensionMismatch(format!(
            "reading has length {} but the fit has {} sensors",
            z.len(),
            fit.sensor_dim()
        )));
    }
    Ok(fit.b_hat.transpose() * z)
}

/// Largest violation of `H' b_j = e_j` across state columns.
pub fn constraint_residual(fit: &RegressionFit, h: &DMatrix<f64>) -> Result<f64> {
    check_constraint_map(h, fit.sensor_dim(), fit.state_dim())?;
    let gap = h.transpose() * &fit.b_hat - DMatrix::identity(fit.state_dim(), fit.state_dim());
    Ok(gap.abs().max())
}

/// Largest violation of the smooth stationarity conditions at the fitted
/// coefficients, in each kind's stored dual scaling. For lasso kinds this is
/// the subgradient gap, identical to [`lasso_subgradient_gap`].
pub fn stationarity_residual(
    fit: &RegressionFit,
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
    h: Option<&DMatrix<f64>>,
) -> Result<f64> {
    Ok(certificate(fit, z, x, h)?.0)
}

/// Largest amount by which the fitted coefficients violate the lasso
/// optimality conditions: active coordinates must see a gradient of exactly
/// `lambda w` against their sign, inactive ones a gradient no larger.
pub fn lasso_subgradient_gap(
    fit: &RegressionFit,
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
    h: Option<&DMatrix<f64>>,
) -> Result<f64> {
    Ok(certificate(fit, z, x, h)?.0)
}

fn certificate(
    fit: &RegressionFit,
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
    h: Option<&DMatrix<f64>>,
) -> Result<(f64, f64)> {
    let (t, d, k) = check_training(z, x)?;
    if fit.b_hat.shape() != (d, k) {
        return Err(Error::DimensionMismatch(format!(
            "fit is {}x{} but the data imply {d}x{k}",
            fit.sensor_dim(),
            fit.state_dim()
        )));
    }
    let h = match (fit.kind.is_constrained(), h) {
        (true, Some(h)) => {
            check_constraint_map(h, d, k)?;
            Some(h)
        }
        (true, None) => {
            return Err(Error::DimensionMismatch(
                "a constrained fit needs its constraint map to be certified".into(),
            ))
        }
        (false, _) => None,
    };
    let duals = if fit.kind.is_constrained() {
        Some(fit.duals.as_ref().ok_or_else(|| {
            Error::DimensionMismatch("constrained fit is missing its duals".into())
        })?)
    } else {
        None
    };
    let residual_cols = z * &fit.b_hat - x;
    let mut stationarity: f64 = 0.0;
    let mut constraint: f64 = 0.0;
    for j in 0..k {
        let lambda = fit.lambdas[j];
        let b_j = fit.b_hat.column(j);
        let grad_ls = z.transpose() * residual_cols.column(j);
        if fit.kind.is_lasso() {
            let mut r = grad_ls * (2.0 / t as f64);
            if let (Some(h), Some(duals)) = (h, duals) {
                r += h * duals.column(j);
            }
            for i in 0..d {
                let w = fit.penalty_weights.as_ref().map_or(1.0, |w| w[(i, j)]);
                let gap = if b_j[i].abs() > ZERO_TOL {
                    (-r[i] - lambda * w * b_j[i].signum()).abs()
                } else {
                    (r[i].abs() - lambda * w).max(0.0)
                };
                stationarity = stationarity.max(gap);
            }
        } else {
            let mut g = grad_ls + b_j * (t as f64 * lambda);
            if let (Some(h), Some(duals)) = (h, duals) {
                g += h * duals.column(j);
            }
            stationarity = stationarity.max(g.abs().max());
        }
        if let Some(h) = h {
            let mut c = h.transpose() * b_j;
            c[j] -= 1.0;
            constraint = constraint.max(c.abs().max());
        }
    }
    Ok((stationarity, constraint))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{empirical_covariance, sf_estimate, shrunk_covariance};
    use crate::lds_core::{simulate_lds, LinearSystem, SensorHierarchy};
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    /// Deterministic training data on the five-state demo hierarchy.
    fn demo_data(steps: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let h = SensorHierarchy::two_region_demo()
            .measurement_map()
            .unwrap();
        let k = h.ncols();
        let f = DMatrix::identity(k, k) * 0.8;
        let q = DMatrix::identity(k, k) * 0.3;
        let r = DMatrix::from_fn(h.nrows(), h.nrows(), |i, j| {
            if i == j {
                0.5 + 0.1 * i as f64
            } else {
                0.0
            }
        });
        let sys = LinearSystem::new(f, h.clone(), q, r).unwrap();
        let traj = simulate_lds(&sys, &DVector::zeros(k), steps, seed).unwrap();
        (traj.measurements, traj.states, h)
    }

    #[test]
    fn constrained_ls_satisfies_its_optimality_system() {
        let (z, x, h) = demo_data(60, 2);
        let fit = fit_constrained_ls(&z, &x, &h).unwrap();
        assert!(constraint_residual(&fit, &h).unwrap() < 1e-9);
        assert!(stationarity_residual(&fit, &z, &x, Some(&h)).unwrap() < 1e-6);
        assert!(fit.diagnostics.converged);
    }

    #[test]
    fn constrained_ls_predictions_match_fusion_with_the_residual_covariance() {
        let (z, x, h) = demo_data(60, 3);
        let fit = fit_constrained_ls(&z, &x, &h).unwrap();
        let cov = empirical_covariance(&z, &x, &h).unwrap();
        for i in [0usize, 17, 59] {
            let z_i = z.row(i).transpose();
            let fused = sf_estimate(&h, &cov, &z_i).unwrap();
            let regressed = predict(&fit, &z_i).unwrap();
            assert!(
                (&fused - &regressed).abs().max() < 1e-8,
                "row {i}: fused {fused} vs regressed {regressed}"
            );
        }
    }

    #[test]
    fn constrained_ridge_matches_fusion_with_shrunk_covariance() {
        let (z, x, h) = demo_data(60, 4);
        let alpha = 0.5;
        let fit = fit_constrained_ridge(&z, &x, &h, (1.0 - alpha) / alpha).unwrap();
        let cov = shrunk_covariance(&empirical_covariance(&z, &x, &h).unwrap(), alpha).unwrap();
        let z_i = z.row(30).transpose();
        let fused = sf_estimate(&h, &cov, &z_i).unwrap();
        let regressed = predict(&fit, &z_i).unwrap();
        assert!((&fused - &regressed).abs().max() < 1e-8);
    }

    #[test]
    fn huge_ridge_penalty_recovers_the_minimum_norm_feasible_point() {
        let (z, x, h) = demo_data(40, 5);
        // Shrink the data so the dominating penalty stays inside the solver's
        // condition ceiling.
        let z = z * 1e-3;
        let fit = fit_constrained_ridge(&z, &x, &h, 1e3).unwrap();
        // As the penalty dominates, the solution approaches
        // argmin |b| s.t. H'b = e_j, which is H (H'H)^{-1} e_j.
        let hth = h.transpose() * &h;
        let min_norm = &h
            * hth
                .cholesky()
                .unwrap()
                .solve(&DMatrix::identity(h.ncols(), h.ncols()));
        assert!((&fit.b_hat - &min_norm).abs().max() < 1e-6);
    }

    #[test]
    fn constrained_lasso_at_zero_penalty_matches_constrained_ls() {
        let (z, x, h) = demo_data(50, 6);
        let ls = fit_constrained_ls(&z, &x, &h).unwrap();
        let lasso = fit_constrained_lasso(&z, &x, &h, 0.0, None).unwrap();
        assert!(lasso.diagnostics.converged);
        assert!(
            (&ls.b_hat - &lasso.b_hat).abs().max() < 1e-6,
            "gap {}",
            (&ls.b_hat - &lasso.b_hat).abs().max()
        );
    }

    #[test]
    fn lasso_optimality_certificates_hold_mid_path() {
        let (z, x, h) = demo_data(50, 7);
        let lmax = lambda_max(&z, &x).unwrap();
        let grid = [lmax, lmax * 0.3, lmax * 0.1, lmax * 0.03];
        let fits =
            fit_constrained_lasso_path(&z, &x, &h, &grid, None, &LassoSettings::default()).unwrap();
        for fit in &fits {
            assert!(fit.diagnostics.converged);
            assert!(constraint_residual(fit, &h).unwrap() < 1e-8);
            let gap = lasso_subgradient_gap(fit, &z, &x, Some(&h)).unwrap();
            assert!(gap < 1e-5, "subgradient gap {gap}");
        }
    }

    #[test]
    fn warm_started_path_matches_cold_fits() {
        let (z, x, h) = demo_data(50, 8);
        let lmax = lambda_max(&z, &x).unwrap();
        let grid = [lmax * 0.5, lmax * 0.1, lmax * 0.02];
        let path =
            fit_constrained_lasso_path(&z, &x, &h, &grid, None, &LassoSettings::default()).unwrap();
        for (fit, &lambda) in path.iter().zip(&grid) {
            let cold = fit_constrained_lasso(&z, &x, &h, lambda, None).unwrap();
            assert!(
                (&fit.b_hat - &cold.b_hat).abs().max() < 1e-6,
                "lambda {lambda}"
            );
        }
    }

    #[test]
    fn heavy_penalty_zeroes_an_unconstrained_fit() {
        let (z, x, _) = demo_data(50, 9);
        let lmax = lambda_max(&z, &x).unwrap();
        let fit = fit_lasso(&z, &x, lmax * 1.01, None).unwrap();
        assert!(
            fit.b_hat.abs().max() < 1e-7,
            "max coefficient {}",
            fit.b_hat.abs().max()
        );
    }

    #[test]
    fn zero_weight_coordinates_escape_the_penalty() {
        let (z, x, _) = demo_data(50, 10);
        let (d, k) = (z.ncols(), x.ncols());
        // Leave the first two sensors unpenalized and crush the rest.
        let weights = DMatrix::from_fn(d, k, |i, _| if i < 2 { 0.0 } else { 1.0 });
        let lmax = lambda_max(&z, &x).unwrap();
        let fit = fit_lasso(&z, &x, lmax * 10.0, Some(&weights)).unwrap();
        for j in 0..k {
            for i in 2..d {
                assert!(
                    fit.b_hat[(i, j)].abs() < 1e-7,
                    "penalized ({i},{j}) = {}",
                    fit.b_hat[(i, j)]
                );
            }
        }
        // The unpenalized block solves the reduced least squares.
        let z_head = z.columns(0, 2).clone_owned();
        let reduced = fit_ridge(&z_head, &x, 0.0).unwrap();
        assert!(
            (&fit.b_hat.rows(0, 2).clone_owned() - &reduced.b_hat)
                .abs()
                .max()
                < 1e-5,
            "unpenalized block should match the reduced fit"
        );
    }

    #[test]
    fn ridge_at_zero_rejects_a_singular_gram_matrix() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let err = fit_ridge(&z, &x, 0.0).unwrap_err();
        assert!(matches!(err, Error::SingularGram { .. }), "got {err:?}");
        assert!(fit_ridge(&z, &x, 0.5).is_ok());
    }

    #[test]
    fn duplicate_constraint_columns_are_a_singular_system() {
        let (z, x, _) = demo_data(30, 11);
        let mut h = DMatrix::zeros(z.ncols(), x.ncols());
        h.fill_column(0, 1.0);
        h.fill_column(1, 1.0);
        let err = fit_constrained_ls(&z, &x, &h).unwrap_err();
        assert!(matches!(err, Error::SingularKkt { .. }), "got {err:?}");
    }

    #[test]
    fn invalid_penalties_and_empty_data_are_rejected() {
        let (z, x, h) = demo_data(30, 12);
        assert!(matches!(
            fit_constrained_ridge(&z, &x, &h, -1.0).unwrap_err(),
            Error::InvalidLambda(_)
        ));
        assert!(matches!(
            fit_lasso(&z, &x, f64::NAN, None).unwrap_err(),
            Error::InvalidLambda(_)
        ));
        let empty_z = DMatrix::<f64>::zeros(0, 3);
        let empty_x = DMatrix::<f64>::zeros(0, 2);
        assert!(matches!(
            fit_ridge(&empty_z, &empty_x, 0.1).unwrap_err(),
            Error::EmptyHistory
        ));
    }

    #[test]
    fn lambda_max_matches_a_hand_computation() {
        let z = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let x = DMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        // Z'X = 11, t = 2, so the threshold is 11.
        assert!((lambda_max(&z, &x).unwrap() - 11.0).abs() < 1e-12);
        let fit = fit_lasso(&z, &x, 11.0, None).unwrap();
        assert!(fit.b_hat.abs().max() < 1e-8);
    }

    #[test]
    fn fits_round_trip_through_json() {
        let (z, x, h) = demo_data(40, 13);
        let lmax = lambda_max(&z, &x).unwrap();
        let fit = fit_constrained_lasso(&z, &x, &h, lmax * 0.2, None).unwrap();
        let json = fit.to_json_string();
        let back = RegressionFit::from_json_str(&json).unwrap();
        assert_eq!(back.kind, fit.kind);
        assert_eq!(back.lambdas, fit.lambdas);
        assert_eq!(back.b_hat, fit.b_hat);
        assert_eq!(back.duals, fit.duals);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn constrained_fits_always_satisfy_the_constraint(
            seed in 0u64..10_000,
            steps in 20usize..60,
            lambda_scale in 0.0f64..0.5,
        ) {
            let (z, x, h) = demo_data(steps, seed);
            let fit = fit_constrained_ls(&z, &x, &h).unwrap();
            prop_assert!(constraint_residual(&fit, &h).unwrap() < 1e-8);
            prop_assert!(stationarity_residual(&fit, &z, &x, Some(&h)).unwrap() < 1e-6);
            let lmax = lambda_max(&z, &x).unwrap();
            let lasso = fit_constrained_lasso(&z, &x, &h, lmax * lambda_scale, None).unwrap();
            prop_assert!(constraint_residual(&lasso, &h).unwrap() < 1e-8);
        }
    }
}
