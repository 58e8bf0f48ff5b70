//! Dense symmetric linear algebra on small matrices.
//!
//! Exact-GP posteriors and the PSD audits only ever see systems of a few
//! hundred rows, so an unblocked Cholesky is plenty.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric matrix, or `None` when a
/// pivot is not strictly positive.
pub fn cholesky(a: ArrayView2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Cholesky with diagonal jitter escalation: on failure add `1e-10` to the
/// diagonal and multiply by 10 until `1e-4`, then give up.
pub fn cholesky_with_jitter(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    if let Some(l) = cholesky(a) {
        return Ok(l);
    }
    let mut jitter = 1e-10;
    while jitter <= 1e-4 {
        let mut aj = a.to_owned();
        for i in 0..aj.nrows() {
            aj[[i, i]] += jitter;
        }
        if let Some(l) = cholesky(aj.view()) {
            return Ok(l);
        }
        jitter *= 10.0;
    }
    Err(Error::numerical(format!(
        "matrix of order {} not positive definite after jitter up to 1e-4",
        a.nrows()
    )))
}

/// Solve `L x = b` with `L` lower triangular.
pub fn solve_lower(l: ArrayView2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = b.to_owned();
    for i in 0..n {
        for k in 0..i {
            let v = x[k];
            x[i] -= l[[i, k]] * v;
        }
        x[i] /= l[[i, i]];
    }
    x
}

/// Solve `L^T x = b` with `L` lower triangular.
pub fn solve_lower_transpose(l: ArrayView2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = b.to_owned();
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let v = x[k];
            x[i] -= l[[k, i]] * v;
        }
        x[i] /= l[[i, i]];
    }
    x
}

/// Solve `A x = b` given the Cholesky factor `L` of `A`.
pub fn cholesky_solve(l: ArrayView2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let y = solve_lower(l, b);
    solve_lower_transpose(l, y.view())
}

/// True when the symmetric matrix is positive semidefinite up to `slack`
/// (checked as Cholesky feasibility of `A + slack I`).
pub fn is_psd_within(a: ArrayView2<f64>, slack: f64) -> bool {
    let mut shifted = a.to_owned();
    for i in 0..shifted.nrows() {
        shifted[[i, i]] += slack;
    }
    cholesky(shifted.view()).is_some()
}
