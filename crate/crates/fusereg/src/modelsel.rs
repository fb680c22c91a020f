//! Candidate process-model sensors, the scalar model-selection experiment
//! that weighs them against raw measurements with a constrained lasso, and
//! the boosting loop that assimilates external source columns.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lds_core::{simulate_forced_ar, FORCING_FREQUENCY};
use crate::regression::{
    fit_constrained_lasso, fit_constrained_lasso_path, fit_constrained_ls, lambda_max, predict,
    LassoSettings,
};

/// Frequency handed to the sine and cosine candidates (the generator's own).
pub const CANDIDATE_FREQUENCY: f64 = FORCING_FREQUENCY;
/// Interior knot count of the spline candidate's basis.
pub const SPLINE_INTERIOR_KNOTS: usize = 10;
/// Cubic basis.
pub const SPLINE_DEGREE: usize = 3;
/// Ridge grid searched when fitting the spline candidate, largest first.
const SPLINE_RIDGE_GRID: [f64; 6] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
/// Ridge used when the history is too short to hold out validation points.
const SPLINE_RIDGE_FALLBACK: f64 = 1e-3;
/// Points held out for tuning-parameter validation throughout this module.
const HOLDOUT: usize = 10;

/// First time index at which candidates are fitted in the experiment; the
/// spline and AR fits need a stable amount of history behind them.
pub const FIT_START: usize = 30;
/// Steps discarded before coefficients are recorded.
pub const BURN_IN: usize = 150;
/// Recorded prediction steps.
pub const EVAL_STEPS: usize = 50;
/// Penalty grid size for the experiment's per-step selection.
const GRID_POINTS: usize = 20;
/// The grid spans `lambda_max` down to this fraction of it.
const GRID_FLOOR: f64 = 1e-2;
/// Looser solver tolerance used while scanning the grid; the chosen penalty
/// is refit at full precision.
const GRID_TOL: f64 = 1e-7;

/// The five candidate process models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateKind {
    LinearAr,
    QuadraticAr,
    SplineBasis,
    Sine,
    Cosine,
}

impl CandidateKind {
    pub const ALL: [CandidateKind; 5] = [
        CandidateKind::LinearAr,
        CandidateKind::QuadraticAr,
        CandidateKind::SplineBasis,
        CandidateKind::Sine,
        CandidateKind::Cosine,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CandidateKind::LinearAr => "linear-ar",
            CandidateKind::QuadraticAr => "quadratic-ar",
            CandidateKind::SplineBasis => "spline-basis",
            CandidateKind::Sine => "sine",
            CandidateKind::Cosine => "cosine",
        }
    }
}

impl fmt::Display for CandidateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Feature map a fitted candidate evaluates.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMap {
    /// Previous state raised to a power (1 for the linear, 2 for the
    /// quadratic autoregression).
    Lag { power: i32 },
    /// `sin(frequency * t)`.
    TimeSine { frequency: f64 },
    /// `cos(frequency * t)`.
    TimeCosine { frequency: f64 },
    /// Clamped B-spline basis over the fitting range, with the ridge weight
    /// the validation picked.
    TimeSpline {
        knots: Vec<f64>,
        degree: usize,
        ridge: f64,
    },
}

/// A candidate process model fitted on history through `fitted_through`,
/// ready to predict the state one step later.
#[derive(Debug, Clone)]
pub struct CandidateSensor {
    pub kind: CandidateKind,
    pub coefficients: DVector<f64>,
    pub features: FeatureMap,
    pub fitted_through: usize,
}

/// Single-feature least squares `sum(a y) / sum(a a)`, zero if the feature
/// carries no energy.
fn univariate_ls(features: &[f64], responses: &[f64]) -> f64 {
    let denom: f64 = features.iter().map(|a| a * a).sum();
    if denom <= 1e-300 {
        return 0.0;
    }
    let num: f64 = features.iter().zip(responses).map(|(a, y)| a * y).sum();
    num / denom
}

fn spline_knots(fit_through: usize) -> Vec<f64> {
    let lo = 1.0;
    let hi = (fit_through + 1) as f64;
    let mut knots = vec![lo; SPLINE_DEGREE + 1];
    for i in 1..=SPLINE_INTERIOR_KNOTS {
        knots.push(lo + (hi - lo) * i as f64 / (SPLINE_INTERIOR_KNOTS + 1) as f64);
    }
    knots.extend(std::iter::repeat_n(hi, SPLINE_DEGREE + 1));
    knots
}

/// One row of the clamped B-spline design, by the triangular recursion.
/// Points outside the knot range are clamped to it.
fn bspline_row(x: f64, knots: &[f64], degree: usize) -> Vec<f64> {
    let lo = knots[0];
    let hi = *knots.last().expect("knot vector is nonempty");
    let x = x.clamp(lo, hi);
    let m = knots.len() - 1;
    let mut b = vec![0.0; m];
    if x >= hi {
        // The right boundary belongs to the last nonempty interval.
        let mut last = m - 1;
        while last > 0 && knots[last] >= hi {
            last -= 1;
        }
        b[last] = 1.0;
    } else {
        for i in 0..m {
            if knots[i] <= x && x < knots[i + 1] {
                b[i] = 1.0;
            }
        }
    }
    for p in 1..=degree {
        let mut next = vec![0.0; m - p];
        for (i, slot) in next.iter_mut().enumerate() {
            let mut v = 0.0;
            if knots[i + p] > knots[i] {
                v += (x - knots[i]) / (knots[i + p] - knots[i]) * b[i];
            }
            if knots[i + p + 1] > knots[i + 1] {
                v += (knots[i + p + 1] - x) / (knots[i + p + 1] - knots[i + 1]) * b[i + 1];
            }
            *slot = v;
        }
        b = next;
    }
    b.truncate(knots.len() - degree - 1);
    b
}

fn spline_design(times: &[f64], knots: &[f64]) -> DMatrix<f64> {
    let nb = knots.len() - SPLINE_DEGREE - 1;
    let mut design = DMatrix::zeros(times.len(), nb);
    for (r, &t) in times.iter().enumerate() {
        let row = bspline_row(t, knots, SPLINE_DEGREE);
        for (c, v) in row.iter().enumerate() {
            design[(r, c)] = v * 1.0;
        }
    }
    design
}

fn spline_solve(design: &DMatrix<f64>, y: &DVector<f64>, ridge: f64) -> DVector<f64> {
    let nb = design.ncols();
    let gram = design.transpose() * design + DMatrix::identity(nb, nb) * ridge;
    let rhs = design.transpose() * y;
    gram.cholesky()
        .expect("ridge keeps the spline normal equations positive definite")
        .solve(&rhs)
}

fn fit_spline(history: &[f64], t: usize) -> CandidateSensor {
    let knots = spline_knots(t);
    let times: Vec<f64> = (1..=t).map(|i| i as f64).collect();
    let design = spline_design(&times, &knots);
    let y = DVector::from_row_slice(&history[..t]);
    // Ridge weight by held-out one-step error on the most recent points,
    // largest weight winning ties; too little history falls back to a fixed
    // middle-of-grid weight.
    let ridge = if t >= HOLDOUT + 2 {
        let head = t - HOLDOUT;
        let design_head = design.rows(0, head).clone_owned();
        let y_head = y.rows(0, head).clone_owned();
        let mut best = (f64::INFINITY, SPLINE_RIDGE_FALLBACK);
        for &cand in &SPLINE_RIDGE_GRID {
            let coef = spline_solve(&design_head, &y_head, cand);
            let mut err = 0.0;
            for v in head..t {
                err += (design.row(v).transpose().dot(&coef) - y[v]).abs();
            }
            err /= HOLDOUT as f64;
            if err < best.0 - 1e-12 {
                best = (err, cand);
            }
        }
        best.1
    } else {
        SPLINE_RIDGE_FALLBACK
    };
    let coefficients = spline_solve(&design, &y, ridge);
    CandidateSensor {
        kind: CandidateKind::SplineBasis,
        coefficients,
        features: FeatureMap::TimeSpline {
            knots,
            degree: SPLINE_DEGREE,
            ridge,
        },
        fitted_through: t,
    }
}

/// Fits one candidate on `history` through time `t` (`history[i]` is the
/// state at time `i+1`; only the first `t` entries are read, so later data
/// cannot leak into the fit).
pub fn fit_candidate(kind: CandidateKind, history: &[f64], t: usize) -> Result<CandidateSensor> {
    if history.len() < t {
        return Err(Error::InsufficientHistory {
            kind: kind.name(),
            needed: t,
            have: history.len(),
        });
    }
    let min_points = 2;
    if t < min_points {
        return Err(Error::InsufficientHistory {
            kind: kind.name(),
            needed: min_points,
            have: t,
        });
    }
    let fitted = &history[..t];
    match kind {
        CandidateKind::LinearAr => {
            let features: Vec<f64> = fitted[..t - 1].to_vec();
            let coef = univariate_ls(&features, &fitted[1..]);
            Ok(CandidateSensor {
                kind,
                coefficients: DVector::from_element(1, coef),
                features: FeatureMap::Lag { power: 1 },
                fitted_through: t,
            })
        }
        CandidateKind::QuadraticAr => {
            let features: Vec<f64> = fitted[..t - 1].iter().map(|v| v * v).collect();
            let coef = univariate_ls(&features, &fitted[1..]);
            Ok(CandidateSensor {
                kind,
                coefficients: DVector::from_element(1, coef),
                features: FeatureMap::Lag { power: 2 },
                fitted_through: t,
            })
        }
        CandidateKind::Sine => {
            let features: Vec<f64> = (1..=t)
                .map(|i| (CANDIDATE_FREQUENCY * i as f64).sin())
                .collect();
            let coef = univariate_ls(&features, fitted);
            Ok(CandidateSensor {
                kind,
                coefficients: DVector::from_element(1, coef),
                features: FeatureMap::TimeSine {
                    frequency: CANDIDATE_FREQUENCY,
                },
                fitted_through: t,
            })
        }
        CandidateKind::Cosine => {
            let features: Vec<f64> = (1..=t)
                .map(|i| (CANDIDATE_FREQUENCY * i as f64).cos())
                .collect();
            let coef = univariate_ls(&features, fitted);
            Ok(CandidateSensor {
                kind,
                coefficients: DVector::from_element(1, coef),
                features: FeatureMap::TimeCosine {
                    frequency: CANDIDATE_FREQUENCY,
                },
                fitted_through: t,
            })
        }
        CandidateKind::SplineBasis => Ok(fit_spline(history, t)),
    }
}

impl CandidateSensor {
    /// One-step-ahead prediction at time `s = fitted_through + 1`. Lag kinds
    /// read the state at `s - 1` from `history`.
    pub fn predict(&self, history: &[f64], s: usize) -> Result<f64> {
        if s != self.fitted_through + 1 {
            return Err(Error::Config(format!(
                "candidate fitted through {} can only predict time {}, asked for {s}",
                self.fitted_through,
                self.fitted_through + 1
            )));
        }
        match &self.features {
            FeatureMap::Lag { power } => {
                if s < 2 || history.len() < s - 1 {
                    return Err(Error::InsufficientHistory {
                        kind: self.kind.name(),
                        needed: s - 1,
                        have: history.len(),
                    });
                }
                Ok(self.coefficients[0] * history[s - 2].powi(*power))
            }
            FeatureMap::TimeSine { frequency } => {
                Ok(self.coefficients[0] * (frequency * s as f64).sin())
            }
            FeatureMap::TimeCosine { frequency } => {
                Ok(self.coefficients[0] * (frequency * s as f64).cos())
            }
            FeatureMap::TimeSpline { knots, degree, .. } => {
                let row = bspline_row(s as f64, knots, *degree);
                Ok(row
                    .iter()
                    .zip(self.coefficients.iter())
                    .map(|(b, c)| b * c)
                    .sum())
            }
        }
    }
}

/// Evaluates every candidate's prediction for time `s`; all sensors must be
/// fitted through `s - 1`.
pub fn candidate_outputs(
    sensors: &[CandidateSensor],
    history: &[f64],
    s: usize,
) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(sensors.len());
    for (i, sensor) in sensors.iter().enumerate() {
        out[i] = sensor.predict(history, s)?;
    }
    Ok(out)
}

/// One recorded step of the selection experiment.
#[derive(Debug, Clone)]
pub struct ModelselRow {
    /// Prediction time.
    pub step: usize,
    /// Four measurement coefficients followed by the five candidate
    /// coefficients, in [`CandidateKind::ALL`] order.
    pub coefficients: Vec<f64>,
    /// Penalty the rolling validation chose for this step.
    pub lambda: f64,
}

/// Medians of the recorded coefficients, with the four measurement
/// coefficients summed per step before taking their median.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelselSummary {
    pub measurements: f64,
    pub linear_ar: f64,
    pub quadratic_ar: f64,
    pub spline_basis: f64,
    pub sine: f64,
    pub cosine: f64,
}

#[derive(Debug, Clone)]
pub struct ModelselOutput {
    pub rows: Vec<ModelselRow>,
    pub summary: ModelselSummary,
    pub column_names: Vec<String>,
}

impl ModelselOutput {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("step");
        for name in &self.column_names {
            out.push(',');
            out.push_str(name);
        }
        out.push_str(",lambda\n");
        for row in &self.rows {
            out.push_str(&row.step.to_string());
            for c in &row.coefficients {
                out.push(',');
                out.push_str(&format!("{c}"));
            }
            out.push_str(&format!(",{}\n", row.lambda));
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serialization cannot fail")
    }
}

pub(crate) fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    values.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in median input"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn descending_grid(hi: f64, lo: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![hi];
    }
    let ratio = lo / hi;
    (0..points)
        .map(|i| hi * ratio.powf(i as f64 / (points - 1) as f64))
        .collect()
}

/// Runs the scalar selection experiment: simulates the forced
/// autoregression, and for each step after the burn-in fuses the four raw
/// measurements with the five candidate outputs through a constrained lasso
/// that penalizes only the candidates. Returns the per-step coefficients,
/// the penalty chosen each step, and the summary medians.
pub fn run_modelsel_experiment(seed: u64) -> Result<ModelselOutput> {
    let traj = simulate_forced_ar(seed);
    let total = traj.len();
    let x: Vec<f64> = (0..total).map(|i| traj.states[(i, 0)]).collect();
    let d_meas = traj.sensor_dim();
    let n_cand = CandidateKind::ALL.len();
    let width = d_meas + n_cand;

    // Candidate outputs for each time, each fitted only on earlier history.
    let mut cand = vec![DVector::zeros(n_cand); total + 1];
    // `s` is the shared time coordinate of the fit horizon and the output
    // slot, so a range loop reads better than enumerating the container.
    #[allow(clippy::needless_range_loop)]
    for s in FIT_START..=total {
        let sensors = CandidateKind::ALL
            .iter()
            .map(|&kind| fit_candidate(kind, &x, s - 1))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.at_step(s))?;
        cand[s] = candidate_outputs(&sensors, &x, s).map_err(|e| e.at_step(s))?;
    }

    // Every column estimates the same scalar state, so the fused map is a
    // column of ones and the constraint fixes the coefficients' sum to 1.
    let h_fused = DMatrix::from_element(width, 1, 1.0);
    let weights = DMatrix::from_fn(width, 1, |i, _| if i < d_meas { 0.0 } else { 1.0 });

    let mut rows = Vec::with_capacity(EVAL_STEPS);
    for step in (BURN_IN + 1)..=total {
        let times: Vec<usize> = (FIT_START..step).collect();
        let n = times.len();
        let mut z_til = DMatrix::zeros(n, width);
        let mut x_resp = DMatrix::zeros(n, 1);
        for (r, &i) in times.iter().enumerate() {
            for j in 0..d_meas {
                z_til[(r, j)] = traj.measurements[(i - 1, j)];
            }
            for j in 0..n_cand {
                z_til[(r, d_meas + j)] = cand[i][j];
            }
            x_resp[(r, 0)] = x[i - 1];
        }
        let head = n - HOLDOUT;
        let z_head = z_til.rows(0, head).clone_owned();
        let x_head = x_resp.rows(0, head).clone_owned();

        // Penalty scale from the penalized block alone.
        let z_cand_head = z_head.columns(d_meas, n_cand).clone_owned();
        let lam_max = lambda_max(&z_cand_head, &x_head).map_err(|e| e.at_step(step))?;
        let grid = descending_grid(lam_max, GRID_FLOOR * lam_max, GRID_POINTS);
        let scan_settings = LassoSettings {
            tol: GRID_TOL,
            ..LassoSettings::default()
        };
        let path = fit_constrained_lasso_path(
            &z_head,
            &x_head,
            &h_fused,
            &grid,
            Some(&weights),
            &scan_settings,
        )
        .map_err(|e| e.at_step(step))?;
        let mut best = (f64::INFINITY, grid[0]);
        for (fit, &lam) in path.iter().zip(&grid) {
            let mut err = 0.0;
            for v in head..n {
                let z_row = z_til.row(v).transpose();
                err +=
                    (predict(fit, &z_row).map_err(|e| e.at_step(step))?[0] - x_resp[(v, 0)]).abs();
            }
            err /= HOLDOUT as f64;
            if err < best.0 - 1e-12 {
                best = (err, lam);
            }
        }
        let final_fit = fit_constrained_lasso(&z_til, &x_resp, &h_fused, best.1, Some(&weights))
            .map_err(|e| e.at_step(step))?;
        rows.push(ModelselRow {
            step,
            coefficients: final_fit.b_hat.column(0).iter().cloned().collect(),
            lambda: best.1,
        });
    }

    let meas_sums: Vec<f64> = rows
        .iter()
        .map(|r| r.coefficients[..d_meas].iter().sum())
        .collect();
    let col = |j: usize| -> Vec<f64> { rows.iter().map(|r| r.coefficients[d_meas + j]).collect() };
    let summary = ModelselSummary {
        measurements: median(meas_sums),
        linear_ar: median(col(0)),
        quadratic_ar: median(col(1)),
        spline_basis: median(col(2)),
        sine: median(col(3)),
        cosine: median(col(4)),
    };
    let mut column_names: Vec<String> = (1..=d_meas).map(|j| format!("b_z{j}")).collect();
    column_names.extend(
        CandidateKind::ALL
            .iter()
            .map(|k| format!("b_{}", k.to_string().replace('-', "_"))),
    );
    Ok(ModelselOutput {
        rows,
        summary,
        column_names,
    })
}

/// Fits a scalar predictor from one source column to residual targets.
pub trait BaseLearner: Send + Sync {
    fn fit(
        &self,
        covariates: &[f64],
        responses: &[f64],
    ) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>>;
}

/// Univariate linear regression with intercept; a degenerate covariate
/// yields the response mean.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearLearner;

impl BaseLearner for LinearLearner {
    fn fit(
        &self,
        covariates: &[f64],
        responses: &[f64],
    ) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        let n = covariates.len();
        if n == 0 || responses.len() != n {
            return Err(Error::InsufficientHistory {
                kind: "linear base learner",
                needed: 1,
                have: n.min(responses.len()),
            });
        }
        let mean_u: f64 = covariates.iter().sum::<f64>() / n as f64;
        let mean_y: f64 = responses.iter().sum::<f64>() / n as f64;
        let var: f64 = covariates.iter().map(|u| (u - mean_u).powi(2)).sum();
        let slope = if var > 1e-12 * (1.0 + mean_u * mean_u) {
            let cov: f64 = covariates
                .iter()
                .zip(responses)
                .map(|(u, y)| (u - mean_u) * (y - mean_y))
                .sum();
            cov / var
        } else {
            0.0
        };
        let intercept = mean_y - slope * mean_u;
        Ok(Box::new(move |u| slope * u + intercept))
    }
}

/// How the boosting loop seeds its running state estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoostInit {
    Zeros,
    /// Constrained least squares of the states on the raw source columns.
    LinearSf,
}

/// Boosting-loop configuration: learning rate, iteration count, seed mode,
/// and one base learner per source column.
#[derive(Clone)]
pub struct BoostConfig {
    pub eta: f64,
    pub iterations: usize,
    pub init: BoostInit,
    pub learners: Vec<Arc<dyn BaseLearner>>,
}

impl BoostConfig {
    /// The default stack: the same linear learner on every source.
    pub fn uniform_linear(eta: f64, iterations: usize, init: BoostInit, sources: usize) -> Self {
        BoostConfig {
            eta,
            iterations,
            init,
            learners: (0..sources)
                .map(|_| Arc::new(LinearLearner) as Arc<dyn BaseLearner>)
                .collect(),
        }
    }

    fn validate(&self, sources: usize) -> Result<()> {
        if !self.eta.is_finite() || self.eta < 0.0 {
            return Err(Error::Config(format!(
                "learning rate eta = {} must be finite and nonnegative",
                self.eta
            )));
        }
        if self.learners.len() != sources {
            return Err(Error::Config(format!(
                "{} base learners for {} source columns",
                self.learners.len(),
                sources
            )));
        }
        Ok(())
    }
}

/// Outcome of the boosting loop: the next-step state prediction and the
/// training loss after initialization and after each iteration.
#[derive(Debug, Clone)]
pub struct BoostResult {
    pub prediction: DVector<f64>,
    pub train_losses: Vec<f64>,
}

/// Assimilates `d` external source columns into a state prediction by
/// boosted residual fitting: each iteration fits the base learners to the
/// current sensor-space residuals `y_i - H x_i^(b)`, fuses their outputs
/// through a constrained regression against the state residuals, and takes
/// an `eta`-sized step. Returns the prediction at time `t+1` driven by
/// `u_next`.
pub fn boost_assimilate(
    x: &DMatrix<f64>,
    u: &DMatrix<f64>,
    h: &DMatrix<f64>,
    cfg: &BoostConfig,
    u_next: &DVector<f64>,
) -> Result<BoostResult> {
    let t = x.nrows();
    if t == 0 {
        return Err(Error::EmptyHistory);
    }
    let (k, d) = (x.ncols(), u.ncols());
    if u.nrows() != t {
        return Err(Error::DimensionMismatch(format!(
            "states cover {t} steps but sources cover {}",
            u.nrows()
        )));
    }
    if h.shape() != (d, k) {
        return Err(Error::DimensionMismatch(format!(
            "H must be {d}x{k}, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    if u_next.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "u_next has length {} but there are {d} sources",
            u_next.len()
        )));
    }
    cfg.validate(d)?;

    // Sensor-space targets y_i = H x_i for the training rows.
    let y = x * h.transpose();
    // Running estimates for rows 1..t plus the prediction row t+1.
    let mut current = DMatrix::zeros(t + 1, k);
    if cfg.init == BoostInit::LinearSf {
        let fit = fit_constrained_ls(u, x, h)?;
        for i in 0..t {
            let est = fit.b_hat.transpose() * u.row(i).transpose();
            current.row_mut(i).copy_from(&est.transpose());
        }
        let est = fit.b_hat.transpose() * u_next;
        current.row_mut(t).copy_from(&est.transpose());
    }

    let train_loss = |estimates: &DMatrix<f64>| -> f64 {
        let resid = &y - estimates.rows(0, t) * h.transpose();
        resid.iter().map(|v| v * v).sum()
    };
    let mut train_losses = vec![train_loss(&current)];

    for b in 1..=cfg.iterations {
        let sensor_resid = &y - current.rows(0, t) * h.transpose();
        // Intermediate sensor readings for rows 1..t and the next step.
        let mut z_boost = DMatrix::zeros(t + 1, d);
        for j in 0..d {
            let covariates: Vec<f64> = (0..t).map(|i| u[(i, j)]).collect();
            let responses: Vec<f64> = (0..t).map(|i| sensor_resid[(i, j)]).collect();
            let predictor = cfg.learners[j]
                .fit(&covariates, &responses)
                .map_err(|e| e.at_step(b))?;
            for i in 0..t {
                z_boost[(i, j)] = predictor(u[(i, j)]);
            }
            z_boost[(t, j)] = predictor(u_next[j]);
        }
        let state_resid = x - current.rows(0, t);
        let fit = fit_constrained_ls(
            &z_boost.rows(0, t).clone_owned(),
            &state_resid.clone_owned(),
            h,
        )
        .map_err(|e| e.at_step(b))?;
        let refinement = &z_boost * &fit.b_hat;
        current += refinement * cfg.eta;
        train_losses.push(train_loss(&current));
    }

    Ok(BoostResult {
        prediction: current.row(t).transpose(),
        train_losses,
    })
}
