//! Jittered Cholesky factorization and triangular-solve helpers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Diagonal jitter ladder for GP training matrices.
pub const FIT_JITTER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// Ladder for posterior covariances over candidate sets. These are often
/// exactly singular (candidates coinciding with noiseless training points), so
/// the ladder starts one rung lower than [`FIT_JITTER`].
pub const SAMPLE_JITTER: [f64; 5] = [0.0, 1e-12, 1e-10, 1e-8, 1e-6];

/// Lower Cholesky factor of `a + jitter·I` for the first jitter on the ladder
/// that factorizes. Returns the factor and the jitter that was used.
pub fn cholesky_jittered(a: &DMatrix<f64>, ladder: &[f64], what: &'static str) -> Result<(DMatrix<f64>, f64)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), ladder.first().copied().unwrap_or(0.0)));
    }
    let mut last = 0.0;
    for &jitter in ladder {
        last = jitter;
        let mut m = a.clone();
        if jitter > 0.0 {
            for i in 0..n {
                m[(i, i)] += jitter;
            }
        }
        if let Some(chol) = Cholesky::<f64, Dyn>::new(m) {
            return Ok((chol.unpack(), jitter));
        }
    }
    Err(Error::NotPositiveDefinite { what, jitter: last })
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    l.solve_lower_triangular(b)
        .expect("Cholesky factor has a positive diagonal")
}

pub fn solve_lower_mat(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    l.solve_lower_triangular(b)
        .expect("Cholesky factor has a positive diagonal")
}

/// Solves `(L Lᵀ) x = b`.
pub fn cho_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let z = solve_lower(l, b);
    l.tr_solve_lower_triangular(&z)
        .expect("Cholesky factor has a positive diagonal")
}

pub fn log_det_from_cholesky(l: &DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}
