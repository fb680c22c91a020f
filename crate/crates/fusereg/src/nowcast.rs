//! Rolling-window nowcasting harness: causal imputation of gappy sensor
//! panels, per-window penalty tuning, one-step-ahead prediction with each
//! configured method, and score tables over the run.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lds_core::{SensorHierarchy, Trajectory};
use crate::modelsel::median;
use crate::regression::{
    constraint_residual, fit_constrained_lasso, fit_constrained_lasso_path, fit_constrained_ls,
    fit_constrained_ridge, fit_lasso, fit_lasso_path, fit_ridge, lambda_max, predict,
    LassoSettings, RegressionFit,
};

/// Estimators the harness can run side by side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Constrained least squares, the fusion estimate under the empirical
    /// residual covariance.
    Sf,
    SfRidge,
    SfLasso,
    Ridge,
    Lasso,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Sf,
        Method::SfRidge,
        Method::SfLasso,
        Method::Ridge,
        Method::Lasso,
    ];

    fn tunes_lambda(&self) -> bool {
        !matches!(self, Method::Sf)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Method::Sf => "sf",
            Method::SfRidge => "sf-ridge",
            Method::SfLasso => "sf-lasso",
            Method::Ridge => "ridge",
            Method::Lasso => "lasso",
        };
        f.write_str(name)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s.trim() {
            "sf" => Ok(Method::Sf),
            "sf-ridge" => Ok(Method::SfRidge),
            "sf-lasso" => Ok(Method::SfLasso),
            "ridge" => Ok(Method::Ridge),
            "lasso" => Ok(Method::Lasso),
            other => Err(Error::Config(format!(
                "unknown method '{other}', expected one of sf, sf-ridge, sf-lasso, ridge, lasso"
            ))),
        }
    }
}

/// Validation error used when picking the penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TuneMetric {
    #[default]
    MeanAbs,
    MeanSquared,
}

/// Rolling-run configuration. `lambda_grid` holds multiples of the
/// per-window penalty ceiling, largest first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NowcastConfig {
    pub window: usize,
    pub tune_horizon: usize,
    pub methods: Vec<Method>,
    pub lambda_grid: Vec<f64>,
    pub tune_metric: TuneMetric,
}

/// Fifty log-spaced fractions from 1 down to 1e-4.
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(1.0, 1e-4, 50)
}

fn log_grid(hi: f64, lo: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![hi];
    }
    let ratio = lo / hi;
    (0..points)
        .map(|i| hi * ratio.powf(i as f64 / (points - 1) as f64))
        .collect()
}

impl Default for NowcastConfig {
    fn default() -> Self {
        NowcastConfig {
            window: 156,
            tune_horizon: 10,
            methods: Method::ALL.to_vec(),
            lambda_grid: default_lambda_grid(),
            tune_metric: TuneMetric::MeanAbs,
        }
    }
}

impl NowcastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tune_horizon < 1 {
            return Err(Error::Config("tune_horizon must be at least 1".into()));
        }
        if self.window <= self.tune_horizon {
            return Err(Error::Config(format!(
                "window ({}) must exceed tune_horizon ({})",
                self.window, self.tune_horizon
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        if self.lambda_grid.is_empty() {
            return Err(Error::Config("lambda grid is empty".into()));
        }
        for &g in &self.lambda_grid {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::Config(format!(
                    "lambda grid entries must be positive and finite, got {g}"
                )));
            }
        }
        Ok(())
    }
}

/// One state's one-step-ahead prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub time: usize,
    pub method: Method,
    pub state: usize,
    pub prediction: f64,
    pub truth: f64,
}

/// Error summary for one method over a run segment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRow {
    pub method: Method,
    pub segment: String,
    pub mae: f64,
    pub mad: f64,
    pub evaluated: usize,
    pub failed: usize,
}

#[derive(Debug, Clone)]
pub struct LambdaRow {
    pub time: usize,
    pub method: Method,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct FailureRow {
    pub time: usize,
    pub method: Method,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct NowcastResult {
    pub predictions: Vec<PredictionRow>,
    pub scores: Vec<ScoreRow>,
    pub lambda_log: Vec<LambdaRow>,
    pub failures: Vec<FailureRow>,
    /// Largest entry of |H^T B - I| seen across all constrained fits.
    pub max_constraint_violation: f64,
}

#[derive(Serialize)]
struct ScoreReport<'a> {
    scores: &'a [ScoreRow],
    max_constraint_violation: f64,
    failures: usize,
}

impl NowcastResult {
    pub fn predictions_csv_string(&self) -> String {
        let mut out = String::from("time,method,state,prediction,truth\n");
        for r in &self.predictions {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.time, r.method, r.state, r.prediction, r.truth
            ));
        }
        out
    }

    pub fn lambda_log_csv_string(&self) -> String {
        let mut out = String::from("time,method,lambda\n");
        for r in &self.lambda_log {
            out.push_str(&format!("{},{},{}\n", r.time, r.method, r.lambda));
        }
        out
    }

    pub fn scores_json_string(&self) -> String {
        serde_json::to_string_pretty(&ScoreReport {
            scores: &self.scores,
            max_constraint_violation: self.max_constraint_violation,
            failures: self.failures.len(),
        })
        .expect("score serialization cannot fail")
    }

    pub fn score_for(&self, method: Method) -> Option<&ScoreRow> {
        self.scores.iter().find(|s| s.method == method)
    }
}

/// Fills missing sensor readings causally: each gap takes the mean of that
/// column's strictly earlier observed values; a column with no history yet
/// takes the mapped mean of the earlier states when `states_and_map` is
/// given, and zero otherwise.
pub fn impute(
    measurements: &DMatrix<f64>,
    observed: &DMatrix<bool>,
    states_and_map: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
) -> DMatrix<f64> {
    let (t, d) = measurements.shape();
    let mut filled = measurements.clone_owned();
    let mut col_sum = vec![0.0; d];
    let mut col_count = vec![0usize; d];
    let mut state_sum = states_and_map.map(|(s, _)| DVector::zeros(s.ncols()));
    for i in 0..t {
        for j in 0..d {
            if !observed[(i, j)] {
                filled[(i, j)] = if col_count[j] > 0 {
                    col_sum[j] / col_count[j] as f64
                } else if let (Some(sum), Some((_, h))) = (&state_sum, states_and_map) {
                    if i > 0 {
                        (h * (sum / i as f64))[j]
                    } else {
                        0.0
                    }
                } else {
                    0.0
                };
            }
        }
        for j in 0..d {
            if observed[(i, j)] {
                col_sum[j] += measurements[(i, j)];
                col_count[j] += 1;
            }
        }
        if let (Some(sum), Some((states, _))) = (&mut state_sum, states_and_map) {
            *sum += states.row(i).transpose();
        }
    }
    filled
}

struct WindowFit {
    fit: RegressionFit,
    lambda: Option<f64>,
}

fn fit_at(
    method: Method,
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
    h: &DMatrix<f64>,
    lam: f64,
) -> Result<RegressionFit> {
    match method {
        Method::Sf => fit_constrained_ls(z, x, h),
        Method::SfRidge => fit_constrained_ridge(z, x, h, lam),
        Method::SfLasso => fit_constrained_lasso(z, x, h, lam, None),
        Method::Ridge => fit_ridge(z, x, lam),
        Method::Lasso => fit_lasso(z, x, lam, None),
    }
}

fn tune_and_fit(
    method: Method,
    z_win: &DMatrix<f64>,
    x_win: &DMatrix<f64>,
    h: &DMatrix<f64>,
    cfg: &NowcastConfig,
    grid_ratios: &[f64],
) -> Result<WindowFit> {
    if !method.tunes_lambda() {
        return Ok(WindowFit {
            fit: fit_at(method, z_win, x_win, h, 0.0)?,
            lambda: None,
        });
    }
    let n = z_win.nrows();
    let head = n - cfg.tune_horizon;
    let z_head = z_win.rows(0, head).clone_owned();
    let x_head = x_win.rows(0, head).clone_owned();
    let anchor = lambda_max(&z_head, &x_head)?;
    if anchor <= 0.0 {
        return Ok(WindowFit {
            fit: fit_at(method, z_win, x_win, h, 0.0)?,
            lambda: Some(0.0),
        });
    }
    let grid: Vec<f64> = grid_ratios.iter().map(|r| r * anchor).collect();
    let scan_settings = LassoSettings {
        tol: 1e-7,
        ..LassoSettings::default()
    };
    let fits: Vec<RegressionFit> = match method {
        Method::SfLasso => {
            fit_constrained_lasso_path(&z_head, &x_head, h, &grid, None, &scan_settings)?
        }
        Method::Lasso => fit_lasso_path(&z_head, &x_head, &grid, None, &scan_settings)?,
        _ => grid
            .iter()
            .map(|&lam| fit_at(method, &z_head, &x_head, h, lam))
            .collect::<Result<Vec<_>>>()?,
    };
    let mut best = (f64::INFINITY, grid[0]);
    for (fit, &lam) in fits.iter().zip(&grid) {
        let mut err = 0.0;
        let mut count = 0usize;
        for v in head..n {
            let z_row = z_win.row(v).transpose();
            let pred = predict(fit, &z_row)?;
            for s in 0..x_win.ncols() {
                let e = pred[s] - x_win[(v, s)];
                err += match cfg.tune_metric {
                    TuneMetric::MeanAbs => e.abs(),
                    TuneMetric::MeanSquared => e * e,
                };
                count += 1;
            }
        }
        err /= count as f64;
        if err < best.0 - 1e-12 {
            best = (err, lam);
        }
    }
    Ok(WindowFit {
        fit: fit_at(method, z_win, x_win, h, best.1)?,
        lambda: Some(best.1),
    })
}

/// Rolls a trailing fitting window over the trajectory. At each step the
/// window covers the most recent `window` rows, the penalty is picked by
/// one-step-ahead error on the window's final `tune_horizon` rows, the
/// chosen fit is refit on the whole window, and the next state vector is
/// predicted from the next measurement row. Failed fits are logged and the
/// run continues.
pub fn rolling_nowcast(
    traj: &Trajectory,
    h: &DMatrix<f64>,
    cfg: &NowcastConfig,
) -> Result<NowcastResult> {
    cfg.validate()?;
    let t_total = traj.len();
    let (k, d) = (traj.state_dim(), traj.sensor_dim());
    if h.shape() != (d, k) {
        return Err(Error::DimensionMismatch(format!(
            "measurement map must be {d}x{k}, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    if t_total <= cfg.window + cfg.tune_horizon {
        return Err(Error::WindowTooShort {
            window: cfg.window,
            tune_horizon: cfg.tune_horizon,
            available: t_total,
        });
    }
    let z_full = impute(&traj.measurements, &traj.observed, Some((&traj.states, h)));
    let mut grid_ratios = cfg.lambda_grid.clone();
    grid_ratios.sort_by(|a, b| b.partial_cmp(a).expect("grid entries are finite"));

    let mut predictions = Vec::new();
    let mut lambda_log = Vec::new();
    let mut failures = Vec::new();
    let mut max_violation: f64 = 0.0;

    for s in (cfg.window + 1)..=t_total {
        let start = s - 1 - cfg.window;
        let z_win = z_full.rows(start, cfg.window).clone_owned();
        let x_win = traj.states.rows(start, cfg.window).clone_owned();
        let z_next = z_full.row(s - 1).transpose();
        for &method in &cfg.methods {
            match tune_and_fit(method, &z_win, &x_win, h, cfg, &grid_ratios) {
                Ok(win) => {
                    if let Some(lam) = win.lambda {
                        lambda_log.push(LambdaRow {
                            time: s,
                            method,
                            lambda: lam,
                        });
                    }
                    if win.fit.kind.is_constrained() {
                        max_violation = max_violation.max(constraint_residual(&win.fit, h)?);
                    }
                    match predict(&win.fit, &z_next) {
                        Ok(pred) => {
                            for state in 0..k {
                                predictions.push(PredictionRow {
                                    time: s,
                                    method,
                                    state,
                                    prediction: pred[state],
                                    truth: traj.states[(s - 1, state)],
                                });
                            }
                        }
                        Err(e) => failures.push(FailureRow {
                            time: s,
                            method,
                            message: e.to_string(),
                        }),
                    }
                }
                Err(e) => failures.push(FailureRow {
                    time: s,
                    method,
                    message: e.to_string(),
                }),
            }
        }
    }

    let mut scores = Vec::new();
    for &method in &cfg.methods {
        let errs: Vec<f64> = predictions
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.prediction - r.truth).abs())
            .collect();
        if errs.is_empty() {
            continue;
        }
        let mae = errs.iter().sum::<f64>() / errs.len() as f64;
        let mad = median(errs.clone());
        scores.push(ScoreRow {
            method,
            segment: "overall".into(),
            mae,
            mad,
            evaluated: errs.len() / k,
            failed: failures.iter().filter(|f| f.method == method).count(),
        });
    }

    Ok(NowcastResult {
        predictions,
        scores,
        lambda_log,
        failures,
        max_constraint_violation: max_violation,
    })
}

/// Reads a trajectory from the CSV schema written by
/// [`Trajectory::write_csv`]; parse failures carry the line number and
/// missing columns are listed by name.
pub fn ingest_csv(path: &Path) -> Result<Trajectory> {
    Trajectory::read_csv(path)
}

pub const BENCHMARK_STEPS: usize = 85;
pub const BENCHMARK_WINDOW: usize = 26;
const BENCH_AR: f64 = 0.8;
const BENCH_PROCESS_SD: f64 = 0.3;
const BENCH_SEASON_PERIOD: f64 = 52.0;
const BENCH_PHASE_STEP: f64 = 0.3;
const BENCH_FORCING: f64 = 0.2;
const BENCH_SENSOR_SD: [f64; 8] = [1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 1.1, 1.5];
const BENCH_BIAS_SD: f64 = 0.3;
const BENCH_BIAS_SEED_XOR: u64 = 0x9E37_79B9;

/// Bundled benchmark: the two-region demo map observed through eight
/// sensors with unequal noise floors and a per-sensor constant bias, over a
/// seasonal autoregression. Returns the trajectory and the map.
pub fn benchmark_trajectory(seed: u64) -> (Trajectory, DMatrix<f64>) {
    let h = SensorHierarchy::two_region_demo()
        .measurement_map()
        .expect("demo hierarchy is well formed");
    let (d, k) = h.shape();
    let normal = StandardNormal;
    let mut bias_rng = ChaCha8Rng::seed_from_u64(seed ^ BENCH_BIAS_SEED_XOR);
    let bias: Vec<f64> = (0..d)
        .map(|_| {
            let n: f64 = normal.sample(&mut bias_rng);
            n * BENCH_BIAS_SD
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = DMatrix::zeros(BENCHMARK_STEPS, k);
    let mut measurements = DMatrix::zeros(BENCHMARK_STEPS, d);
    let mut x = DVector::from_element(k, 1.0);
    for t in 1..=BENCHMARK_STEPS {
        for i in 0..k {
            let season = (2.0 * std::f64::consts::PI * t as f64 / BENCH_SEASON_PERIOD
                + BENCH_PHASE_STEP * i as f64)
                .sin();
            let noise: f64 = normal.sample(&mut rng);
            x[i] = BENCH_AR * x[i] + BENCH_FORCING * season + BENCH_PROCESS_SD * noise;
        }
        let clean = &h * &x;
        for j in 0..d {
            let noise: f64 = normal.sample(&mut rng);
            measurements[(t - 1, j)] = clean[j] + BENCH_SENSOR_SD[j] * noise + bias[j];
        }
        states.row_mut(t - 1).copy_from(&x.transpose());
    }
    let traj = Trajectory::fully_observed(states, measurements)
        .expect("benchmark dimensions are consistent");
    (traj, h)
}

/// Configuration the bundled benchmark is scored under.
pub fn benchmark_config() -> NowcastConfig {
    NowcastConfig {
        window: BENCHMARK_WINDOW,
        tune_horizon: 10,
        methods: vec![Method::Sf, Method::SfRidge],
        lambda_grid: log_grid(1.0, 1e-4, 20),
        tune_metric: TuneMetric::MeanAbs,
    }
}
