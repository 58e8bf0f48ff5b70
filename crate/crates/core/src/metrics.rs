//! Test-set quality metrics recorded at every active-learning iteration.
//!
//! * NMSE: mean squared residual over the test set divided by the test-label
//!   variance, so 1.0 is the score of predicting the test mean.
//! * NPLL: negative sum of per-point predictive log densities. For the
//!   ensemble the per-point density is the weighted Gaussian mixture with
//!   observation noise folded into each component; for the exact GP it is a
//!   single Gaussian.

use ndarray::{ArrayView1, ArrayView2};

use crate::egp::EnsembleState;
use crate::error::{Error, Result};
use crate::exact_gp::ExactGp;
use crate::util::{log_normal_pdf, mean_and_population_variance};

/// One row of a learning curve.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IterationMetrics {
    /// Iteration index; 0 is the initial model before any query.
    pub t: usize,
    pub nmse: f64,
    pub npll: f64,
    /// Wall-clock time spent on this iteration, milliseconds.
    pub wall_ms: f64,
}

/// Population variance of the test labels: the NMSE normalizer, computed
/// once per experiment.
pub fn test_label_variance(test_y: ArrayView1<f64>) -> Result<f64> {
    if test_y.is_empty() {
        return Err(Error::Metric("empty test set".into()));
    }
    let values: Vec<f64> = test_y.iter().copied().collect();
    let (_, var) = mean_and_population_variance(&values);
    if var <= 0.0 {
        return Err(Error::Metric(
            "test labels have zero variance; NMSE is undefined".into(),
        ));
    }
    Ok(var)
}

/// Normalized mean-square error of point predictions.
pub fn nmse(
    predictions: ArrayView1<f64>,
    test_y: ArrayView1<f64>,
    sigma2_y: f64,
) -> Result<f64> {
    if predictions.len() != test_y.len() {
        return Err(Error::DimensionMismatch {
            expected: test_y.len(),
            got: predictions.len(),
        });
    }
    if test_y.is_empty() {
        return Err(Error::Metric("empty test set".into()));
    }
    if !(sigma2_y > 0.0) {
        return Err(Error::Metric(format!(
            "test-label variance must be positive, got {sigma2_y}"
        )));
    }
    let mse: f64 = predictions
        .iter()
        .zip(test_y.iter())
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / test_y.len() as f64;
    Ok(mse / sigma2_y)
}

/// Negative predictive log-likelihood of the test labels under the ensemble
/// mixture, summed (not averaged) over test points.
pub fn npll_mixture(
    en: &EnsembleState,
    test_x: ArrayView2<f64>,
    test_y: ArrayView1<f64>,
) -> Result<f64> {
    if test_x.nrows() != test_y.len() {
        return Err(Error::DimensionMismatch {
            expected: test_x.nrows(),
            got: test_y.len(),
        });
    }
    let batch = en.predict_batch(&test_x.to_owned())?;
    let noise = en.noise_var();
    let mut total = 0.0;
    for (i, &y) in test_y.iter().enumerate() {
        total -= batch.at(i).log_predictive_density(y, noise);
    }
    Ok(total)
}

/// Negative predictive log-likelihood under an exact GP posterior.
pub fn npll_exact(
    gp: &ExactGp,
    test_x: ArrayView2<f64>,
    test_y: ArrayView1<f64>,
) -> Result<f64> {
    if test_x.nrows() != test_y.len() {
        return Err(Error::DimensionMismatch {
            expected: test_x.nrows(),
            got: test_y.len(),
        });
    }
    let (means, vars) = gp.predict_batch(test_x)?;
    let noise = gp.noise_var();
    let mut total = 0.0;
    for ((&m, &v), &y) in means.iter().zip(vars.iter()).zip(test_y.iter()) {
        total -= log_normal_pdf(y, m, v + noise);
    }
    Ok(total)
}
