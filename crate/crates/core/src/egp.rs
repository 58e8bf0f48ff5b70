//! Ensemble of random-feature GP experts with Bayesian model averaging.
//!
//! Each expert is a [`ExpertState`] built from one dictionary kernel; the
//! ensemble maintains a categorical posterior over experts. After each
//! observation the expert weights multiply by the expert's predictive density
//! of that observation and renormalize, all in log space, so the weights
//! after a data stream equal the per-expert marginal likelihoods up to the
//! shared normalizer.
//!
//! All experts see the same inputs and share one noise variance; their
//! frequencies come from a single standard-normal base matrix rescaled per
//! lengthscale, so weight differences reflect the kernels rather than the
//! Monte Carlo draw.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::gp_expert::ExpertState;
use crate::rff::{draw_standard_normal_base, KernelSpec, SpectralFeatures};
use crate::util::{log_normal_pdf, logsumexp};

const ENSEMBLE_MAGIC: &[u8; 8] = b"EGPENS01";

/// Per-expert predictions at a single input plus the current weights.
#[derive(Debug, Clone)]
pub struct MixturePrediction {
    /// Normalized expert weights, length `M`.
    pub weights: Array1<f64>,
    /// Per-expert posterior means, length `M`.
    pub means: Array1<f64>,
    /// Per-expert function variances (noise-free), length `M`.
    pub function_vars: Array1<f64>,
}

impl MixturePrediction {
    /// Weight-averaged mean of the mixture.
    pub fn consensus_mean(&self) -> f64 {
        self.weights.dot(&self.means)
    }

    /// Variance of the mixture by the law of total variance:
    /// `sum_m w_m (var_m + (mean_m - consensus)^2)`.
    pub fn total_variance(&self) -> f64 {
        let consensus = self.consensus_mean();
        self.weights
            .iter()
            .zip(self.means.iter())
            .zip(self.function_vars.iter())
            .map(|((&w, &m), &v)| w * (v + (m - consensus) * (m - consensus)))
            .sum()
    }

    /// Log density of observing `y` under the predictive mixture, where each
    /// component carries the shared observation noise.
    pub fn log_predictive_density(&self, y: f64, noise_var: f64) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(self.means.iter())
            .zip(self.function_vars.iter())
            .map(|((&w, &m), &v)| {
                if w == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    w.ln() + log_normal_pdf(y, m, v + noise_var)
                }
            })
            .collect();
        logsumexp(&terms)
    }
}

/// Per-expert predictions over a whole candidate pool.
///
/// Row `m` of `means`/`function_vars` holds expert `m`'s predictions at every
/// pool point. This is the shape the acquisition scores consume.
#[derive(Debug, Clone)]
pub struct MixtureBatch {
    /// Normalized expert weights, length `M`.
    pub weights: Array1<f64>,
    /// `M x n` per-expert means.
    pub means: Array2<f64>,
    /// `M x n` per-expert function variances.
    pub function_vars: Array2<f64>,
}

impl MixtureBatch {
    pub fn num_points(&self) -> usize {
        self.means.ncols()
    }

    /// Consensus (weight-averaged) mean at each pool point, length `n`.
    pub fn consensus_means(&self) -> Array1<f64> {
        self.weights.dot(&self.means)
    }

    /// Mixture variance at each point in a single law-of-total-variance
    /// pass: `sum_m w_m (var_m + (mean_m - consensus)^2)`.
    pub fn total_variances(&self) -> Array1<f64> {
        let consensus = self.consensus_means();
        let n = self.num_points();
        let mut out = Array1::<f64>::zeros(n);
        for (m, &w) in self.weights.iter().enumerate() {
            let means = self.means.row(m);
            let vars = self.function_vars.row(m);
            for i in 0..n {
                let d = means[i] - consensus[i];
                out[i] += w * (vars[i] + d * d);
            }
        }
        out
    }

    /// The single-point view at pool index `i`.
    pub fn at(&self, i: usize) -> MixturePrediction {
        MixturePrediction {
            weights: self.weights.clone(),
            means: self.means.index_axis(Axis(1), i).to_owned(),
            function_vars: self.function_vars.index_axis(Axis(1), i).to_owned(),
        }
    }
}

/// The full ensemble state: experts plus log-domain weights.
#[derive(Debug, Clone)]
pub struct EnsembleState {
    experts: Vec<ExpertState>,
    /// Normalized log weights (`logsumexp == 0`), length `M`.
    log_weights: Array1<f64>,
}

impl EnsembleState {
    /// Assemble an ensemble from ready-made experts with uniform weights.
    /// All experts must share the input dimension and noise variance.
    pub fn new(experts: Vec<ExpertState>) -> Result<Self> {
        if experts.is_empty() {
            return Err(Error::parameter("ensemble needs at least one expert"));
        }
        let dim = experts[0].input_dim();
        let noise = experts[0].noise_var();
        for e in &experts[1..] {
            if e.input_dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: e.input_dim(),
                });
            }
            if e.noise_var() != noise {
                return Err(Error::parameter(
                    "experts must share a single observation noise variance",
                ));
            }
        }
        let m = experts.len();
        let log_weights = Array1::from_elem(m, -(m as f64).ln());
        Ok(EnsembleState {
            experts,
            log_weights,
        })
    }

    /// Build one expert per dictionary kernel. A single `D x d` standard
    /// normal base (seeded by `seed`) is rescaled by each kernel's
    /// lengthscale, and each expert's weight prior variance is its kernel's
    /// magnitude so the prior function variance matches the kernel diagonal.
    pub fn from_dictionary(
        dictionary: &[KernelSpec],
        dim: usize,
        num_features: usize,
        noise_var: f64,
        seed: u64,
    ) -> Result<Self> {
        if dictionary.is_empty() {
            return Err(Error::parameter("kernel dictionary must be nonempty"));
        }
        if dim == 0 || num_features == 0 {
            return Err(Error::parameter(
                "input dimension and feature count must be at least 1",
            ));
        }
        let base = draw_standard_normal_base(dim, num_features, seed);
        let mut experts = Vec::with_capacity(dictionary.len());
        for spec in dictionary {
            let features = SpectralFeatures::from_base(&base, spec.lengthscale)?;
            experts.push(ExpertState::new(features, spec.magnitude_sigma2, noise_var)?);
        }
        EnsembleState::new(experts)
    }

    pub fn num_experts(&self) -> usize {
        self.experts.len()
    }

    pub fn input_dim(&self) -> usize {
        self.experts[0].input_dim()
    }

    pub fn noise_var(&self) -> f64 {
        self.experts[0].noise_var()
    }

    pub fn experts(&self) -> &[ExpertState] {
        &self.experts
    }

    pub fn log_weights(&self) -> &Array1<f64> {
        &self.log_weights
    }

    pub fn weights(&self) -> Array1<f64> {
        self.log_weights.mapv(f64::exp)
    }

    /// Per-expert predictions at one input under the current weights.
    pub fn predict(&self, x: ArrayView1<f64>) -> Result<MixturePrediction> {
        let m = self.num_experts();
        let mut means = Array1::<f64>::zeros(m);
        let mut vars = Array1::<f64>::zeros(m);
        for (i, e) in self.experts.iter().enumerate() {
            let p = e.predict(x)?;
            means[i] = p.mean;
            vars[i] = p.function_var;
        }
        Ok(MixturePrediction {
            weights: self.weights(),
            means,
            function_vars: vars,
        })
    }

    /// Per-expert predictions over every row of `xs`.
    pub fn predict_batch(&self, xs: &Array2<f64>) -> Result<MixtureBatch> {
        let m = self.num_experts();
        let n = xs.nrows();
        let mut means = Array2::<f64>::zeros((m, n));
        let mut vars = Array2::<f64>::zeros((m, n));
        for (i, e) in self.experts.iter().enumerate() {
            let phis = e.features().feature_map_batch(xs)?;
            let (mu, var) = e.predict_batch_with_features(&phis);
            means.row_mut(i).assign(&mu);
            vars.row_mut(i).assign(&var);
        }
        Ok(MixtureBatch {
            weights: self.weights(),
            means,
            function_vars: vars,
        })
    }

    /// Consensus mean at one input (the ensemble's point prediction).
    pub fn consensus_mean(&self, x: ArrayView1<f64>) -> Result<f64> {
        Ok(self.predict(x)?.consensus_mean())
    }

    /// Log predictive density of `(x, y)` under the weighted mixture,
    /// including observation noise. Does not change any state.
    pub fn log_predictive_density(&self, x: ArrayView1<f64>, y: f64) -> Result<f64> {
        Ok(self.predict(x)?.log_predictive_density(y, self.noise_var()))
    }

    /// Absorb one labeled point: every expert runs its rank-1 update, and
    /// the log weights gain each expert's predictive log density before
    /// renormalization. Returns the mixture log density of the observation.
    pub fn update(&mut self, x: ArrayView1<f64>, y: f64) -> Result<f64> {
        // Validate before mutating so an error cannot leave half the experts
        // updated.
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        for (e, lw) in self.experts.iter_mut().zip(self.log_weights.iter_mut()) {
            let density = e.update(x, y)?;
            *lw += density.log_density;
        }
        let norm = logsumexp(self.log_weights.as_slice().unwrap());
        if !norm.is_finite() {
            return Err(Error::numerical(format!(
                "ensemble weight normalizer is not finite (logsumexp = {norm})"
            )));
        }
        self.log_weights -= norm;
        // The normalizer is log sum_m w_m N(y; y_hat_m, s2_m) under the
        // pre-update weights: exactly the mixture predictive log density.
        Ok(norm)
    }

    /// Serialize: magic, expert count, then per expert its log weight
    /// followed by the expert block, all little-endian.
    pub fn write_to<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(ENSEMBLE_MAGIC)?;
        w.write_all(&(self.experts.len() as u64).to_le_bytes())?;
        for (e, lw) in self.experts.iter().zip(self.log_weights.iter()) {
            w.write_all(&lw.to_le_bytes())?;
            e.write_to(w)?;
        }
        Ok(())
    }

    pub fn read_from<R: std::io::Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != ENSEMBLE_MAGIC {
            return Err(Error::parameter(
                "not an ensemble checkpoint (bad magic bytes)",
            ));
        }
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let m = u64::from_le_bytes(buf) as usize;
        if m == 0 || m > 1 << 16 {
            return Err(Error::parameter(format!(
                "implausible ensemble size {m} in checkpoint"
            )));
        }
        let mut experts = Vec::with_capacity(m);
        let mut log_weights = Array1::<f64>::zeros(m);
        for i in 0..m {
            r.read_exact(&mut buf)?;
            log_weights[i] = f64::from_le_bytes(buf);
            experts.push(ExpertState::read_from(r)?);
        }
        let mut out = EnsembleState::new(experts)?;
        out.log_weights = log_weights;
        Ok(out)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        use std::io::Write;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

/// The standard kernel dictionary: unit-magnitude RBF kernels with
/// lengthscales `10^c` for integer `c` in `[lo, hi]`.
pub fn log_lengthscale_dictionary(lo: i32, hi: i32) -> Vec<KernelSpec> {
    (lo..=hi)
        .map(|c| KernelSpec::rbf(10f64.powi(c), 1.0).expect("positive lengthscale"))
        .collect()
}
