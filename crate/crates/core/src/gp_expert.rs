//! One ensemble expert: Bayesian linear regression on a random-feature map.
//!
//! An expert keeps a Gaussian posterior `N(theta_hat, sigma)` over the `2D`
//! feature weights, starting from the prior `N(0, prior_var * I)`. Each
//! observation is absorbed with a rank-1 Kalman update, so the state after a
//! stream of points equals the batch posterior over the same points while
//! costing `O(D^2)` per step instead of a full solve.
//!
//! Predictions come in two flavors: the *function* variance
//! `phi^T sigma phi` (epistemic only) used by the acquisition scores, and the
//! *predictive* variance `phi^T sigma phi + noise_var` used for likelihoods
//! of noisy observations.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::rff::SpectralFeatures;
use crate::util::log_normal_pdf;

/// Mean and noise-free function variance at one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    /// `phi^T sigma phi`, clamped at zero.
    pub function_var: f64,
}

/// Predictive density of an observation under the current posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveDensity {
    pub y_hat: f64,
    /// `phi^T sigma phi + noise_var`; strictly positive.
    pub s2: f64,
    pub log_density: f64,
}

/// Posterior state of one random-feature expert.
#[derive(Debug, Clone)]
pub struct ExpertState {
    features: SpectralFeatures,
    /// Posterior mean over feature weights, length `2D`.
    theta_hat: Array1<f64>,
    /// Posterior covariance over feature weights, `2D x 2D`, kept symmetric.
    sigma: Array2<f64>,
    prior_var: f64,
    noise_var: f64,
}

impl ExpertState {
    /// Fresh expert at its prior: zero mean, `prior_var * I` covariance.
    pub fn new(features: SpectralFeatures, prior_var: f64, noise_var: f64) -> Result<Self> {
        if !(prior_var > 0.0) || !prior_var.is_finite() {
            return Err(Error::parameter(format!(
                "prior weight variance must be positive and finite, got {prior_var}"
            )));
        }
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::parameter(format!(
                "noise variance must be positive and finite, got {noise_var}"
            )));
        }
        let p = features.output_dim();
        Ok(ExpertState {
            features,
            theta_hat: Array1::zeros(p),
            sigma: Array2::eye(p) * prior_var,
            prior_var,
            noise_var,
        })
    }

    pub fn features(&self) -> &SpectralFeatures {
        &self.features
    }

    pub fn theta_hat(&self) -> &Array1<f64> {
        &self.theta_hat
    }

    pub fn sigma(&self) -> &Array2<f64> {
        &self.sigma
    }

    pub fn prior_var(&self) -> f64 {
        self.prior_var
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn input_dim(&self) -> usize {
        self.features.input_dim()
    }

    /// Feature vector for one input; thin wrapper kept public so callers can
    /// reuse it across the predict/likelihood/update sequence.
    pub fn feature_vector(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.features.feature_map(x)
    }

    /// Mean and function variance at `x`.
    pub fn predict(&self, x: ArrayView1<f64>) -> Result<Prediction> {
        let phi = self.feature_vector(x)?;
        Ok(self.predict_with_features(phi.view()))
    }

    /// Prediction from a precomputed feature vector.
    pub fn predict_with_features(&self, phi: ArrayView1<f64>) -> Prediction {
        let mean = self.theta_hat.dot(&phi);
        let function_var = phi.dot(&self.sigma.dot(&phi)).max(0.0);
        Prediction { mean, function_var }
    }

    /// Means and function variances for a stack of precomputed feature rows
    /// (`n x 2D`). One matrix product instead of `n` quadratic forms.
    pub fn predict_batch_with_features(&self, phi: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
        let means = phi.dot(&self.theta_hat);
        let sv = phi.dot(&self.sigma); // n x 2D
        let vars = (&sv * phi)
            .sum_axis(ndarray::Axis(1))
            .mapv(|v| v.max(0.0));
        (means, vars)
    }

    /// Predictive density of observing `y` at `x` before updating.
    pub fn predictive_likelihood(&self, x: ArrayView1<f64>, y: f64) -> Result<PredictiveDensity> {
        let phi = self.feature_vector(x)?;
        Ok(self.predictive_likelihood_with_features(phi.view(), y))
    }

    pub fn predictive_likelihood_with_features(
        &self,
        phi: ArrayView1<f64>,
        y: f64,
    ) -> PredictiveDensity {
        let p = self.predict_with_features(phi);
        let s2 = p.function_var + self.noise_var;
        PredictiveDensity {
            y_hat: p.mean,
            s2,
            log_density: log_normal_pdf(y, p.mean, s2),
        }
    }

    /// Absorb one observation `(x, y)` with a rank-1 Kalman update.
    pub fn update(&mut self, x: ArrayView1<f64>, y: f64) -> Result<PredictiveDensity> {
        let phi = self.feature_vector(x)?;
        Ok(self.update_with_features(phi.view(), y))
    }

    /// Update from a precomputed feature vector; returns the pre-update
    /// predictive density, which is exactly the factor the ensemble weights
    /// need.
    pub fn update_with_features(&mut self, phi: ArrayView1<f64>, y: f64) -> PredictiveDensity {
        let sv = self.sigma.dot(&phi); // sigma phi
        let y_hat = self.theta_hat.dot(&phi);
        let s2 = phi.dot(&sv).max(0.0) + self.noise_var;
        let log_density = log_normal_pdf(y, y_hat, s2);

        let gain = &sv / s2;
        self.theta_hat.scaled_add(y - y_hat, &gain);
        // sigma <- sigma - (sigma phi)(sigma phi)^T / s2, then re-symmetrize
        // to stop round-off from drifting the matrix off the symmetric cone.
        let n = self.sigma.nrows();
        for i in 0..n {
            for j in 0..n {
                self.sigma[[i, j]] -= gain[i] * sv[j];
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.sigma[[i, j]] + self.sigma[[j, i]]);
                self.sigma[[i, j]] = avg;
                self.sigma[[j, i]] = avg;
            }
        }

        PredictiveDensity {
            y_hat,
            s2,
            log_density,
        }
    }

    /// Serialize to a little-endian binary block:
    /// `[D, d, prior_var, noise_var, frequencies (D*d row-major),
    ///   theta_hat (2D), sigma (2D*2D row-major)]`
    /// with `D` and `d` as `u64` and everything else as `f64`.
    pub fn write_to<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        let d_feat = self.features.num_features() as u64;
        let d_in = self.features.input_dim() as u64;
        w.write_all(&d_feat.to_le_bytes())?;
        w.write_all(&d_in.to_le_bytes())?;
        w.write_all(&self.prior_var.to_le_bytes())?;
        w.write_all(&self.noise_var.to_le_bytes())?;
        for v in self.features.frequencies().iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in self.theta_hat.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in self.sigma.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: std::io::Read>(r: &mut R) -> Result<Self> {
        let d_feat = read_u64(r)? as usize;
        let d_in = read_u64(r)? as usize;
        if d_feat == 0 || d_in == 0 || d_feat > 1 << 20 || d_in > 1 << 20 {
            return Err(Error::parameter(format!(
                "implausible checkpoint dimensions D={d_feat}, d={d_in}"
            )));
        }
        let prior_var = read_f64(r)?;
        let noise_var = read_f64(r)?;
        let mut freqs = Array2::<f64>::zeros((d_feat, d_in));
        for v in freqs.iter_mut() {
            *v = read_f64(r)?;
        }
        let p = 2 * d_feat;
        let mut theta_hat = Array1::<f64>::zeros(p);
        for v in theta_hat.iter_mut() {
            *v = read_f64(r)?;
        }
        let mut sigma = Array2::<f64>::zeros((p, p));
        for v in sigma.iter_mut() {
            *v = read_f64(r)?;
        }
        Ok(ExpertState {
            features: SpectralFeatures::from_frequencies(freqs)?,
            theta_hat,
            sigma,
            prior_var,
            noise_var,
        })
    }
}

fn read_u64<R: std::io::Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: std::io::Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
