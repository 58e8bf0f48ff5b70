//! Exact Gaussian process regression, used as the non-ensemble baseline.
//!
//! Dense kernel-matrix inference: factor `K + noise * I` once per fit, then
//! answer mean/variance queries against the factor. Hyperparameters come
//! from a log-marginal-likelihood grid search rather than gradient ascent,
//! which keeps the baseline deterministic and dependency-free.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::gp_expert::Prediction;
use crate::linalg::{cholesky_with_jitter, solve_lower};
use crate::rff::KernelSpec;
use crate::util::mean_and_population_variance;

/// A fitted exact GP posterior over a fixed training set.
#[derive(Debug, Clone)]
pub struct ExactGp {
    kernel: KernelSpec,
    noise_var: f64,
    train_x: Array2<f64>,
    /// Lower Cholesky factor of `K + noise_var * I` (jitter included).
    chol: Array2<f64>,
    /// `(K + noise_var I)^-1 y`.
    alpha: Array1<f64>,
    log_marginal: f64,
}

impl ExactGp {
    /// Factor the kernel matrix over `(train_x, train_y)` and precompute the
    /// solve against the labels.
    pub fn fit(
        kernel: KernelSpec,
        noise_var: f64,
        train_x: &Array2<f64>,
        train_y: ArrayView1<f64>,
    ) -> Result<Self> {
        let n = train_x.nrows();
        if n == 0 {
            return Err(Error::parameter("exact GP needs at least one training point"));
        }
        if train_y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: train_y.len(),
            });
        }
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::parameter(format!(
                "noise variance must be positive and finite, got {noise_var}"
            )));
        }
        let mut gram = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v = kernel.value(train_x.row(i), train_x.row(j));
                gram[[i, j]] = v;
                gram[[j, i]] = v;
            }
            gram[[i, i]] += noise_var;
        }
        let chol = cholesky_with_jitter(gram.view())?;
        let alpha = crate::linalg::cholesky_solve(chol.view(), train_y);
        let log_det_half: f64 = (0..n).map(|i| chol[[i, i]].ln()).sum();
        let log_marginal = -0.5 * train_y.dot(&alpha)
            - log_det_half
            - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        Ok(ExactGp {
            kernel,
            noise_var,
            train_x: train_x.clone(),
            chol,
            alpha,
            log_marginal,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn num_train(&self) -> usize {
        self.train_x.nrows()
    }

    /// Log marginal likelihood of the training labels under this fit.
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal
    }

    /// Posterior mean and noise-free function variance at `x`.
    pub fn predict(&self, x: ArrayView1<f64>) -> Result<Prediction> {
        if x.len() != self.train_x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.train_x.ncols(),
                got: x.len(),
            });
        }
        let n = self.num_train();
        let mut kstar = Array1::<f64>::zeros(n);
        for i in 0..n {
            kstar[i] = self.kernel.value(self.train_x.row(i), x);
        }
        let mean = kstar.dot(&self.alpha);
        let v = solve_lower(self.chol.view(), kstar.view());
        let prior = self.kernel.value(x, x);
        let function_var = (prior - v.dot(&v)).max(0.0);
        Ok(Prediction { mean, function_var })
    }

    /// Means and function variances at every row of `xs`.
    pub fn predict_batch(&self, xs: ArrayView2<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
        let n = xs.nrows();
        let mut means = Array1::<f64>::zeros(n);
        let mut vars = Array1::<f64>::zeros(n);
        for (i, row) in xs.rows().into_iter().enumerate() {
            let p = self.predict(row)?;
            means[i] = p.mean;
            vars[i] = p.function_var;
        }
        Ok((means, vars))
    }
}

/// Result of the hyperparameter grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperFit {
    pub kernel: KernelSpec,
    pub noise_var: f64,
    pub log_marginal: f64,
}

/// The default search grids, scaled by the training-label variance:
/// lengthscales over eleven decades, magnitudes and noises as fixed
/// multiples of the label variance.
pub fn default_grids(label_var: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let scale = if label_var > 0.0 { label_var } else { 1.0 };
    let lengthscales: Vec<f64> = (-4..=6).map(|c| 10f64.powi(c)).collect();
    let magnitudes: Vec<f64> = [0.1, 0.5, 1.0, 2.0, 5.0].iter().map(|m| m * scale).collect();
    let noises: Vec<f64> = [1e-4, 1e-3, 1e-2, 1e-1, 1.0]
        .iter()
        .map(|v| v * scale)
        .collect();
    (lengthscales, magnitudes, noises)
}

/// Maximize the log marginal likelihood over explicit grids.
///
/// Candidates are scanned with lengthscale outermost and noise innermost,
/// keeping the first strict improvement, so exact ties resolve to the
/// smallest lengthscale, then the smallest magnitude, then the smallest
/// noise. Candidates whose kernel matrix cannot be factored (even with
/// jitter) are skipped.
pub fn fit_hyperparameters(
    train_x: &Array2<f64>,
    train_y: ArrayView1<f64>,
    lengthscales: &[f64],
    magnitudes: &[f64],
    noises: &[f64],
) -> Result<HyperFit> {
    if lengthscales.is_empty() || magnitudes.is_empty() || noises.is_empty() {
        return Err(Error::parameter("hyperparameter grids must be nonempty"));
    }
    let mut best: Option<HyperFit> = None;
    for &ls in lengthscales {
        for &mag in magnitudes {
            for &noise in noises {
                let kernel = KernelSpec::rbf(ls, mag)?;
                let gp = match ExactGp::fit(kernel, noise, train_x, train_y) {
                    Ok(gp) => gp,
                    Err(Error::Numerical(_)) => continue,
                    Err(e) => return Err(e),
                };
                let lml = gp.log_marginal_likelihood();
                if !lml.is_finite() {
                    continue;
                }
                let improved = match &best {
                    None => true,
                    Some(b) => lml > b.log_marginal,
                };
                if improved {
                    best = Some(HyperFit {
                        kernel,
                        noise_var: noise,
                        log_marginal: lml,
                    });
                }
            }
        }
    }
    best.ok_or_else(|| {
        Error::numerical("no hyperparameter candidate produced a usable kernel matrix")
    })
}

/// Grid search over the default grids derived from the label variance.
pub fn fit_hyperparameters_default(
    train_x: &Array2<f64>,
    train_y: ArrayView1<f64>,
) -> Result<HyperFit> {
    let (_, label_var) = mean_and_population_variance(train_y.as_slice().unwrap_or(
        &train_y.iter().copied().collect::<Vec<_>>(),
    ));
    let (ls, mag, noise) = default_grids(label_var);
    fit_hyperparameters(train_x, train_y, &ls, &mag, &noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_data() -> (Array2<f64>, Array1<f64>) {
        let x = array![[0.0], [0.5], [1.0], [1.7], [2.3]];
        let y = array![0.0, 0.48, 0.84, 0.99, 0.75]; // roughly sin(x)
        (x, y)
    }

    #[test]
    fn one_point_log_marginal_is_the_normal_density() {
        let x = array![[0.3]];
        let y = array![1.4];
        let kernel = KernelSpec::rbf(1.0, 2.0).unwrap();
        let gp = ExactGp::fit(kernel, 0.5, &x, y.view()).unwrap();
        // Marginal of one observation: N(0, magnitude + noise).
        let expected = crate::util::log_normal_pdf(1.4, 0.0, 2.5);
        assert_abs_diff_eq!(gp.log_marginal_likelihood(), expected, epsilon = 1e-12);
    }

    #[test]
    fn two_point_log_marginal_matches_dense_formula() {
        let x = array![[0.0], [1.0]];
        let y = array![0.5, -0.2];
        let kernel = KernelSpec::rbf(0.8, 1.3).unwrap();
        let noise = 0.05;
        let gp = ExactGp::fit(kernel, noise, &x, y.view()).unwrap();
        // Hand-build the 2x2 marginal covariance and invert it directly.
        let k01 = kernel.value(x.row(0), x.row(1));
        let a = 1.3 + noise;
        let det = a * a - k01 * k01;
        let quad = (a * y[0] * y[0] - 2.0 * k01 * y[0] * y[1] + a * y[1] * y[1]) / det;
        let expected =
            -0.5 * quad - 0.5 * det.ln() - (2.0 * std::f64::consts::PI).ln();
        assert_abs_diff_eq!(gp.log_marginal_likelihood(), expected, epsilon = 1e-10);
    }

    #[test]
    fn posterior_interpolates_with_small_noise() {
        let (x, y) = toy_data();
        let kernel = KernelSpec::rbf(1.0, 1.0).unwrap();
        let gp = ExactGp::fit(kernel, 1e-8, &x, y.view()).unwrap();
        for (row, &target) in x.rows().into_iter().zip(y.iter()) {
            let p = gp.predict(row).unwrap();
            assert_abs_diff_eq!(p.mean, target, epsilon = 1e-4);
            assert!(p.function_var < 1e-6);
        }
    }

    #[test]
    fn variance_recovers_prior_far_from_data() {
        let (x, y) = toy_data();
        let kernel = KernelSpec::rbf(0.5, 2.0).unwrap();
        let gp = ExactGp::fit(kernel, 0.01, &x, y.view()).unwrap();
        let far = gp.predict(array![100.0].view()).unwrap();
        assert_abs_diff_eq!(far.function_var, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(far.mean, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn duplicate_points_survive_via_jitter() {
        let x = array![[1.0], [1.0], [2.0]];
        let y = array![0.3, 0.3, -0.1];
        let kernel = KernelSpec::rbf(1.0, 1.0).unwrap();
        // Noise small enough that the duplicated rows make the matrix
        // numerically singular without jitter.
        let gp = ExactGp::fit(kernel, 1e-13, &x, y.view());
        assert!(gp.is_ok());
    }

    #[test]
    fn batch_matches_pointwise() {
        let (x, y) = toy_data();
        let gp = ExactGp::fit(KernelSpec::rbf(1.0, 1.0).unwrap(), 0.01, &x, y.view()).unwrap();
        let queries = array![[0.2], [1.4], [3.0]];
        let (means, vars) = gp.predict_batch(queries.view()).unwrap();
        for (i, row) in queries.rows().into_iter().enumerate() {
            let p = gp.predict(row).unwrap();
            assert_abs_diff_eq!(means[i], p.mean, epsilon = 1e-14);
            assert_abs_diff_eq!(vars[i], p.function_var, epsilon = 1e-14);
        }
    }

    #[test]
    fn grid_search_recovers_generating_lengthscale() {
        // Sample a function from a known GP (lengthscale 1) and check the
        // grid picks that decade back out.
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut x = Array2::<f64>::zeros((n, 1));
        for v in x.iter_mut() {
            *v = rng.gen_range(-3.0..3.0);
        }
        let kernel = KernelSpec::rbf(1.0, 1.0).unwrap();
        let mut gram = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                gram[[i, j]] = kernel.value(x.row(i), x.row(j));
            }
            gram[[i, i]] += 1e-8;
        }
        let chol = crate::linalg::cholesky(gram.view()).unwrap();
        let z = Array1::from_iter((0..n).map(|_| {
            rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)
        }));
        let y = chol.dot(&z);
        let fit = fit_hyperparameters_default(&x, y.view()).unwrap();
        assert_abs_diff_eq!(fit.kernel.lengthscale, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ties_resolve_to_first_candidate_in_scan_order() {
        let (x, y) = toy_data();
        // Duplicate noise entries create exact LML ties; the smaller index
        // (equal value) must win, demonstrated by strict > improvement.
        let fit_a = fit_hyperparameters(&x, y.view(), &[1.0], &[1.0], &[0.1, 0.1]).unwrap();
        let fit_b = fit_hyperparameters(&x, y.view(), &[1.0], &[1.0], &[0.1]).unwrap();
        assert_eq!(fit_a, fit_b);
    }

    #[test]
    fn constant_labels_fall_back_to_unit_scale_grids() {
        let x = array![[0.0], [1.0], [2.0]];
        let y = array![0.0, 0.0, 0.0];
        let fit = fit_hyperparameters_default(&x, y.view());
        assert!(fit.is_ok());
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let x = Array2::<f64>::zeros((0, 1));
        let y = Array1::<f64>::zeros(0);
        assert!(ExactGp::fit(KernelSpec::rbf(1.0, 1.0).unwrap(), 0.1, &x, y.view()).is_err());
    }
}
