//! Shared dense linear algebra helpers: guarded solves and symmetry utilities.
//!
//! Every solve in this crate goes through one of the guarded routines here so
//! that near-singular systems fail loudly instead of amplifying noise. The
//! guard threshold is [`MAX_CONDITION`]; no routine forms an explicit inverse.

// The solve guards negate `<=` on purpose: a NaN or infinite condition number
// must fail the check, which a plain `>` comparison would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Condition-number ceiling shared by all guarded solves.
pub const MAX_CONDITION: f64 = 1e12;

/// Failure modes of the guarded solves, translated by callers into
/// operation-specific errors.
#[derive(Debug, Clone, Copy)]
pub(crate) struct IllConditioned {
    pub cond: f64,
}

/// Returns `(m + m^T) / 2`. Covariance updates re-symmetrize through this to
/// stop round-off drift from accumulating across recursions.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

/// Largest absolute entry of `a - b`; suite deviations and tests use this.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff shape mismatch");
    (a - b).abs().max()
}

/// Condition estimate for a symmetric matrix from its eigenvalue spread.
/// Returns `f64::INFINITY` when the smallest eigenvalue is not positive.
pub(crate) fn symmetric_condition(m: &DMatrix<f64>) -> f64 {
    let eigs = m.clone().symmetric_eigenvalues();
    let max = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `a x = b` for symmetric positive definite `a` via Cholesky, after
/// an eigenvalue-based condition check against [`MAX_CONDITION`].
pub(crate) fn solve_spd(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> std::result::Result<DMatrix<f64>, IllConditioned> {
    let cond = symmetric_condition(a);
    if !(cond <= MAX_CONDITION) {
        return Err(IllConditioned { cond });
    }
    match a.clone().cholesky() {
        Some(chol) => Ok(chol.solve(b)),
        // Eigenvalues passed but the factorization still failed; the matrix
        // is positive definite only marginally, so treat it as singular.
        None => Err(IllConditioned {
            cond: f64::INFINITY,
        }),
    }
}

/// Solves `a x = b` for a general square `a` via LU, with an SVD-based
/// condition check against [`MAX_CONDITION`]. Used for saddle-point (KKT)
/// systems, which are symmetric but indefinite.
pub(crate) fn solve_square(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> std::result::Result<DMatrix<f64>, IllConditioned> {
    let svs = a.clone().singular_values();
    let max = svs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = svs.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if min <= 0.0 || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    };
    if !(cond <= MAX_CONDITION) {
        return Err(IllConditioned { cond });
    }
    a.clone().lu().solve(b).ok_or(IllConditioned {
        cond: f64::INFINITY,
    })
}

/// A reusable LU factorization with the condition guard applied once.
/// Iterative solvers factor their (fixed) saddle-point matrix through this
/// and then back-substitute per iteration.
pub(crate) struct GuardedLu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl GuardedLu {
    pub fn new(a: &DMatrix<f64>) -> std::result::Result<Self, IllConditioned> {
        let svs = a.clone().singular_values();
        let max = svs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = svs.iter().cloned().fold(f64::INFINITY, f64::min);
        let cond = if min <= 0.0 || !max.is_finite() {
            f64::INFINITY
        } else {
            max / min
        };
        if !(cond <= MAX_CONDITION) {
            return Err(IllConditioned { cond });
        }
        Ok(GuardedLu { lu: a.clone().lu() })
    }

    pub fn solve(&self, b: &DVector<f64>) -> std::result::Result<DVector<f64>, IllConditioned> {
        self.lu.solve(b).ok_or(IllConditioned {
            cond: f64::INFINITY,
        })
    }
}

/// Draws one sample from `N(0, cov)`. Uses the Cholesky factor when `cov` is
/// positive definite and falls back to an eigenvalue square root for
/// semi-definite covariances (for example exactly zero noise).
pub(crate) fn sample_mvn_zero<R: Rng>(rng: &mut R, cov: &DMatrix<f64>) -> DVector<f64> {
    let n = cov.nrows();
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    if let Some(chol) = cov.clone().cholesky() {
        return chol.l() * z;
    }
    let eig = nalgebra::SymmetricEigen::new(symmetrize(cov));
    let sqrt_vals = eig
        .eigenvalues
        .map(|v| if v > 0.0 { v.sqrt() } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrize_fixes_drift() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0 + 1e-13, 4.0]);
        let s = symmetrize(&m);
        assert_eq!(s[(0, 1)], s[(1, 0)]);
    }

    #[test]
    fn solve_spd_rejects_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DMatrix::identity(2, 2);
        assert!(solve_spd(&a, &b).is_err());
    }

    #[test]
    fn solve_spd_matches_direct_inverse_on_well_conditioned_input() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let b = DMatrix::identity(2, 2);
        let x = solve_spd(&a, &b).unwrap();
        let residual = (&a * &x - DMatrix::identity(2, 2)).abs().max();
        assert!(residual < 1e-12, "residual {residual}");
    }

    #[test]
    fn sample_mvn_handles_zero_covariance() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let cov = DMatrix::zeros(3, 3);
        let draw = sample_mvn_zero(&mut rng, &cov);
        assert_eq!(draw, DVector::zeros(3));
    }
}
