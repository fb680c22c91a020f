//! Seeded equivalence suites: each one exercises a pair of estimators that
//! must agree to numerical precision, over randomly generated systems, and
//! reports the worst elementwise deviation seen.

use nalgebra::{DMatrix, DVector};
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::Result;
use crate::fusion::{
    empirical_covariance, esf_step, run_augmented_sf, sf_estimate, shrunk_covariance,
    shrunk_covariance_toward, zero_pad, ShrinkageTarget,
};
use crate::kalman::{ekf_step, run_kf, KalmanState, PredictMode};
use crate::lds_core::{simulate_lds, LinearSystem, NonlinearSystem, StateFn};
use crate::linalg::max_abs_diff;
use crate::linalg::sample_mvn_zero;
use crate::regression::{fit_constrained_ls, fit_constrained_ridge, fit_ridge, predict};

/// Outcome of one suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn report(name: &str, cases: usize, max_deviation: f64, tolerance: f64) -> SuiteReport {
    SuiteReport {
        name: name.into(),
        cases,
        max_deviation,
        tolerance,
        pass: max_deviation <= tolerance,
    }
}

fn standard_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let normal = StandardNormal;
    DMatrix::from_fn(rows, cols, |_, _| normal.sample(rng))
}

fn standard_vector<R: Rng>(rng: &mut R, len: usize) -> DVector<f64> {
    let normal = StandardNormal;
    DVector::from_fn(len, |_, _| normal.sample(rng))
}

/// Full-column-rank map with a bounded singular value spread.
fn random_map<R: Rng>(rng: &mut R, d: usize, k: usize) -> DMatrix<f64> {
    loop {
        let h = standard_matrix(rng, d, k);
        let svd = h.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin > 1e-3 * smax {
            return h;
        }
    }
}

fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

/// Random stable system with `d >= k` so the map keeps full column rank.
fn random_linear_system<R: Rng>(
    rng: &mut R,
    k_range: std::ops::RangeInclusive<usize>,
    d_max: usize,
) -> (LinearSystem, DVector<f64>) {
    let k = rng.gen_range(k_range);
    let d = rng.gen_range(k..=d_max.max(k));
    let mut f = standard_matrix(rng, k, k) / (k as f64).sqrt();
    let radius = spectral_radius(&f);
    if radius > 0.9 {
        f *= 0.9 / radius;
    }
    let h = random_map(rng, d, k);
    let a = standard_matrix(rng, k, k);
    let q = &a * a.transpose() / k as f64 + DMatrix::identity(k, k) * 0.05;
    let b = standard_matrix(rng, d, d);
    let r = &b * b.transpose() / d as f64 + DMatrix::identity(d, d) * 0.1;
    let x0 = standard_vector(rng, k);
    (
        LinearSystem::new(f, h, q, r).expect("generated dimensions are consistent"),
        x0,
    )
}

/// The filter and the augmented fusion estimate must coincide step by step,
/// in both the state estimates and their covariances.
pub fn suite_filter_vs_augmented(
    cases: usize,
    steps: usize,
    tolerance: f64,
) -> Result<SuiteReport> {
    let mut max_dev = 0.0f64;
    for c in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(0x11_0000 + c as u64);
        let (sys, x0) = random_linear_system(&mut rng, 1..=5, 8);
        let traj = simulate_lds(&sys, &x0, steps, rng.gen())?;
        let init = KalmanState::default_init(sys.state_dim());
        let kf = run_kf(&sys, &init, &traj.measurements)?;
        let sf = run_augmented_sf(&sys, &init, &traj.measurements)?;
        max_dev = max_dev.max(max_abs_diff(&kf.states, &sf.states));
        for (a, b) in kf.covariances.iter().zip(&sf.covariances) {
            max_dev = max_dev.max(max_abs_diff(a, b));
        }
    }
    Ok(report(
        "filter-vs-augmented-fusion",
        cases,
        max_dev,
        tolerance,
    ))
}

fn regression_instance<R: Rng>(
    rng: &mut R,
    extra_rows: usize,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (sys, x0) = random_linear_system(rng, 1..=4, 8);
    let t = sys.sensor_dim() + extra_rows + rng.gen_range(10..=30);
    let traj = simulate_lds(&sys, &x0, t, rng.gen()).expect("generated system is valid");
    (traj.measurements, traj.states, sys.h.clone())
}

/// Fusion under the empirical residual covariance must equal the
/// constrained least-squares predictor row by row, and the fitted
/// coefficients must sit on the constraint.
pub fn suite_fusion_vs_constrained(cases: usize, tolerance: f64) -> Result<SuiteReport> {
    let mut max_dev = 0.0f64;
    for c in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(0x22_0000 + c as u64);
        let (z, x, h) = regression_instance(&mut rng, 0);
        let fit = fit_constrained_ls(&z, &x, &h)?;
        let emp = empirical_covariance(&z, &x, &h)?;
        let k = h.ncols();
        let gap = h.transpose() * &fit.b_hat - DMatrix::identity(k, k);
        max_dev = max_dev.max(gap.abs().max());
        for r in [0, z.nrows() / 2, z.nrows() - 1] {
            let z_row = z.row(r).transpose();
            let fused = sf_estimate(&h, &emp, &z_row)?;
            let regressed = predict(&fit, &z_row)?;
            max_dev = max_dev.max((fused - regressed).abs().max());
        }
    }
    Ok(report(
        "fusion-vs-constrained-regression",
        cases,
        max_dev,
        tolerance,
    ))
}

/// Shrinking the empirical covariance toward the identity must reproduce
/// the constrained ridge fit at the matched penalty.
pub fn suite_shrinkage_vs_ridge(cases: usize, tolerance: f64) -> Result<SuiteReport> {
    let mut max_dev = 0.0f64;
    for c in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(0x33_0000 + c as u64);
        let (z, x, h) = regression_instance(&mut rng, 0);
        let emp = empirical_covariance(&z, &x, &h)?;
        for &alpha in &[0.1, 0.5, 0.9] {
            let shrunk = shrunk_covariance(&emp, alpha)?;
            let lambda = (1.0 - alpha) / alpha;
            let fit = fit_constrained_ridge(&z, &x, &h, lambda)?;
            for r in [0, z.nrows() - 1] {
                let z_row = z.row(r).transpose();
                let fused = sf_estimate(&h, &shrunk, &z_row)?;
                let regressed = predict(&fit, &z_row)?;
                max_dev = max_dev.max((fused - regressed).abs().max());
            }
        }
    }
    Ok(report("shrinkage-vs-ridge", cases, max_dev, tolerance))
}

/// Zero-padding the panel with exact pseudo-sensors must turn the
/// constrained machinery into plain least squares, and with partial
/// shrinkage into plain ridge at the matched penalty.
pub fn suite_zero_padding_vs_unconstrained(cases: usize, tolerance: f64) -> Result<SuiteReport> {
    let mut max_dev = 0.0f64;
    for c in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(0x44_0000 + c as u64);
        let (z, x, h) = regression_instance(&mut rng, h_pad_extra());
        let (d, k) = h.shape();
        let (h_aug, z_aug) = zero_pad(&h, &z)?;
        let emp_aug = empirical_covariance(&z_aug, &x, &h_aug)?;
        let ls = fit_ridge(&z, &x, 0.0)?;
        let alpha = [0.1, 0.5, 0.9][c % 3];
        let shrunk =
            shrunk_covariance_toward(&emp_aug, alpha, ShrinkageTarget::PartialIdentity { dim: d })?;
        let ridge = fit_ridge(&z, &x, (1.0 - alpha) / alpha)?;
        for r in [0, z.nrows() - 1] {
            let mut z_tilde = DVector::zeros(d + k);
            z_tilde.rows_mut(0, d).copy_from(&z.row(r).transpose());
            let z_row = z.row(r).transpose();
            let fused = sf_estimate(&h_aug, &emp_aug, &z_tilde)?;
            max_dev = max_dev.max((&fused - predict(&ls, &z_row)?).abs().max());
            let fused_shrunk = sf_estimate(&h_aug, &shrunk, &z_tilde)?;
            max_dev = max_dev.max((&fused_shrunk - predict(&ridge, &z_row)?).abs().max());
        }
    }
    Ok(report(
        "zero-padding-vs-unconstrained",
        cases,
        max_dev,
        tolerance,
    ))
}

/// Extra rows so the padded panel's empirical covariance stays invertible.
fn h_pad_extra() -> usize {
    8
}

fn random_nonlinear_system<R: Rng>(rng: &mut R) -> (NonlinearSystem, DVector<f64>) {
    let k = rng.gen_range(1..=3);
    let d = rng.gen_range(k..=4);
    let a = DVector::from_fn(k, |_, _| rng.gen_range(0.5..0.9));
    let b = DVector::from_fn(k, |_, _| rng.gen_range(-0.2..0.2));
    let c_mat = standard_matrix(rng, k, k) * (0.4 / (k as f64).sqrt());
    let h_lin = random_map(rng, d, k);
    let c_amp = DVector::from_fn(d, |_, _| rng.gen_range(-0.3..0.3));
    let d_mat = standard_matrix(rng, d, k) * 0.4;

    let (a_f, b_f, c_f) = (a.clone(), b.clone(), c_mat.clone());
    let f: StateFn = std::sync::Arc::new(move |x: &DVector<f64>| {
        a_f.component_mul(x) + b_f.component_mul(&(&c_f * x).map(f64::tanh))
    });
    let (a_j, b_j, c_j) = (a, b, c_mat);
    let f_jac = std::sync::Arc::new(move |x: &DVector<f64>| {
        let gain = (&c_j * x).map(|v| 1.0 - v.tanh() * v.tanh());
        DMatrix::from_diagonal(&a_j) + DMatrix::from_diagonal(&b_j.component_mul(&gain)) * &c_j
    });
    let (h_f, amp_f, d_f) = (h_lin.clone(), c_amp.clone(), d_mat.clone());
    let h_fn: StateFn = std::sync::Arc::new(move |x: &DVector<f64>| {
        &h_f * x + amp_f.component_mul(&(&d_f * x).map(f64::sin))
    });
    let h_jac = std::sync::Arc::new(move |x: &DVector<f64>| {
        &h_lin + DMatrix::from_diagonal(&c_amp.component_mul(&(&d_mat * x).map(f64::cos))) * &d_mat
    });

    let qa = standard_matrix(rng, k, k);
    let q = &qa * qa.transpose() * 0.01 + DMatrix::identity(k, k) * 0.02;
    let ra = standard_matrix(rng, d, d);
    let r = &ra * ra.transpose() * 0.05 + DMatrix::identity(d, d) * 0.1;
    let x0 = standard_vector(rng, k) * 0.3;
    (
        NonlinearSystem::new(f, f_jac, h_fn, h_jac, q, r).expect("generated covariances square"),
        x0,
    )
}

/// The extended filter and the extended fusion update must coincide at every
/// step, under both prediction conventions.
pub fn suite_extended_filter_vs_fusion(
    cases: usize,
    steps: usize,
    tolerance: f64,
) -> Result<SuiteReport> {
    let mut max_dev = 0.0f64;
    for c in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(0x55_0000 + c as u64);
        let (sys, x0) = random_nonlinear_system(&mut rng);
        let k = sys.state_dim();
        for mode in [PredictMode::Nonlinear, PredictMode::Linearized] {
            let mut truth = x0.clone();
            let mut ekf = KalmanState::new(DVector::zeros(k), DMatrix::identity(k, k))
                .expect("square initial covariance");
            let mut esf = ekf.clone();
            for _ in 0..steps {
                truth = (sys.f)(&truth) + sample_mvn_zero(&mut rng, &sys.q);
                let z = (sys.h)(&truth) + sample_mvn_zero(&mut rng, &sys.r);
                let ekf_out = ekf_step(&ekf, &sys, &z, mode)?;
                let esf_out = esf_step(&esf, &sys, &z, mode)?;
                ekf = ekf_out.posterior;
                esf = esf_out.posterior;
                max_dev = max_dev.max((&ekf.x - &esf.x).abs().max());
                max_dev = max_dev.max(max_abs_diff(&ekf.p, &esf.p));
            }
        }
    }
    Ok(report(
        "extended-filter-vs-fusion",
        cases,
        max_dev,
        tolerance,
    ))
}

/// Runs the five suites with shared case counts and tolerance.
pub fn run_all(cases: usize, steps: usize, tolerance: f64) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        suite_filter_vs_augmented(cases, steps, tolerance)?,
        suite_fusion_vs_constrained(cases, tolerance)?,
        suite_shrinkage_vs_ridge(cases, tolerance)?,
        suite_zero_padding_vs_unconstrained(cases, tolerance)?,
        suite_extended_filter_vs_fusion(cases, steps, tolerance)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (sys, x0) = random_nonlinear_system(&mut rng);
        let probes: Vec<DVector<f64>> = (0..4)
            .map(|_| standard_vector(&mut rng, sys.state_dim()) * 0.5)
            .collect();
        let dev = sys.jacobian_deviation(&probes);
        assert!(dev < 1e-5, "deviation {dev}");
        let _ = x0;
    }

    #[test]
    fn all_suites_pass_on_small_runs() {
        let reports = run_all(4, 15, 1e-8).unwrap();
        assert_eq!(reports.len(), 5);
        for r in &reports {
            assert!(r.pass, "{} deviated by {}", r.name, r.max_deviation);
        }
    }

    #[test]
    fn suites_are_deterministic() {
        let a = suite_filter_vs_augmented(3, 10, 1e-8).unwrap();
        let b = suite_filter_vs_augmented(3, 10, 1e-8).unwrap();
        assert_eq!(a.max_deviation.to_bits(), b.max_deviation.to_bits());
    }
}
