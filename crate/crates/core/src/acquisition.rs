//! Acquisition scores over a candidate pool, computed from ensemble output.
//!
//! All five scores consume the same per-expert pool predictions
//! ([`MixtureBatch`]) and return one score per candidate; the query is the
//! argmax (ties to the lowest index, which keeps runs reproducible).
//!
//! * `WVar`   - weighted average of expert variances.
//! * `WEnt`   - weighted average of expert Gaussian entropies (up to the
//!   additive constant from the entropy formula, which cancels in argmax).
//! * `Qbc`    - weighted squared disagreement of expert means around the
//!   consensus.
//! * `GpmVar` - variance of the mixture; equals `WVar + Qbc` by the law of
//!   total variance.
//! * `GpmEnt` - pairwise-Gaussian lower-bound estimate of the mixture
//!   entropy.
//!
//! The non-ensemble baseline score (exact-GP posterior variance) lives here
//! too so every selection rule goes through the same argmax.

use ndarray::{Array1, ArrayView2};

use crate::egp::MixtureBatch;
use crate::error::Result;
use crate::exact_gp::ExactGp;
use crate::util::{argmax, log_normal_pdf, logsumexp};

/// Variance floor inside logarithms; keeps fully-collapsed experts from
/// producing infinities.
pub const ENTROPY_VAR_FLOOR: f64 = 1e-12;

/// The ensemble-based acquisition functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum AcquisitionKind {
    WVar,
    WEnt,
    Qbc,
    GpmVar,
    GpmEnt,
}

impl AcquisitionKind {
    pub const ALL: [AcquisitionKind; 5] = [
        AcquisitionKind::WVar,
        AcquisitionKind::WEnt,
        AcquisitionKind::Qbc,
        AcquisitionKind::GpmVar,
        AcquisitionKind::GpmEnt,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AcquisitionKind::WVar => "wvar",
            AcquisitionKind::WEnt => "went",
            AcquisitionKind::Qbc => "qbc",
            AcquisitionKind::GpmVar => "gpm-var",
            AcquisitionKind::GpmEnt => "gpm-ent",
        }
    }
}

impl std::fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AcquisitionKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wvar" => Ok(AcquisitionKind::WVar),
            "went" => Ok(AcquisitionKind::WEnt),
            "qbc" => Ok(AcquisitionKind::Qbc),
            "gpm-var" => Ok(AcquisitionKind::GpmVar),
            "gpm-ent" => Ok(AcquisitionKind::GpmEnt),
            other => Err(crate::error::Error::parameter(format!(
                "unknown acquisition function '{other}' \
                 (expected wvar, went, qbc, gpm-var, or gpm-ent)"
            ))),
        }
    }
}

/// Scores for one acquisition function over a pool, in pool order.
#[derive(Debug, Clone)]
pub struct AcquisitionScores {
    pub kind: AcquisitionKind,
    pub values: Array1<f64>,
}

impl AcquisitionScores {
    /// Index of the best candidate (ties to the lowest index).
    pub fn select(&self) -> usize {
        argmax(self.values.as_slice().expect("contiguous scores"))
    }
}

/// Dispatch one ensemble acquisition function over the pool predictions.
pub fn score(kind: AcquisitionKind, batch: &MixtureBatch) -> AcquisitionScores {
    let values = match kind {
        AcquisitionKind::WVar => score_wvar(batch),
        AcquisitionKind::WEnt => score_went(batch),
        AcquisitionKind::Qbc => score_qbc(batch),
        AcquisitionKind::GpmVar => score_gpm_var(batch),
        AcquisitionKind::GpmEnt => score_gpm_ent(batch),
    };
    AcquisitionScores { kind, values }
}

/// Weighted expert variance: `sum_m w_m var_m(x)`.
pub fn score_wvar(batch: &MixtureBatch) -> Array1<f64> {
    batch.weights.dot(&batch.function_vars)
}

/// Weighted expert entropy, dropping the additive constant per expert:
/// `0.5 sum_m w_m ln(2 pi var_m(x))` with the variance floored.
pub fn score_went(batch: &MixtureBatch) -> Array1<f64> {
    let n = batch.num_points();
    let mut out = Array1::<f64>::zeros(n);
    for (m, &w) in batch.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let vars = batch.function_vars.row(m);
        for i in 0..n {
            out[i] += 0.5 * w * (2.0 * std::f64::consts::PI * vars[i].max(ENTROPY_VAR_FLOOR)).ln();
        }
    }
    out
}

/// Query-by-committee disagreement: `sum_m w_m (mean_m(x) - consensus(x))^2`.
pub fn score_qbc(batch: &MixtureBatch) -> Array1<f64> {
    let consensus = batch.consensus_means();
    let n = batch.num_points();
    let mut out = Array1::<f64>::zeros(n);
    for (m, &w) in batch.weights.iter().enumerate() {
        let means = batch.means.row(m);
        for i in 0..n {
            let d = means[i] - consensus[i];
            out[i] += w * d * d;
        }
    }
    out
}

/// Mixture variance as the sum of its two parts. [`MixtureBatch`] computes
/// the same quantity in a single law-of-total-variance pass; keeping both
/// routes lets tests pin the decomposition.
pub fn score_gpm_var(batch: &MixtureBatch) -> Array1<f64> {
    score_wvar(batch) + score_qbc(batch)
}

/// Pairwise-Gaussian mixture entropy estimate:
/// `-sum_m w_m ln( sum_m' w_m' N(mean_m; mean_m', var_m + var_m') )`.
///
/// Inner sums run through `logsumexp`; zero-weight experts are skipped in
/// the outer sum and contribute `-inf` terms (i.e. nothing) to the inner
/// one, so a collapsed weight never poisons the score with `0 * -inf`.
pub fn score_gpm_ent(batch: &MixtureBatch) -> Array1<f64> {
    let m_count = batch.weights.len();
    let n = batch.num_points();
    let mut out = Array1::<f64>::zeros(n);
    let mut inner = vec![0.0f64; m_count];
    for i in 0..n {
        let mut h = 0.0;
        for m in 0..m_count {
            let w_m = batch.weights[m];
            if w_m == 0.0 {
                continue;
            }
            for m2 in 0..m_count {
                let w_m2 = batch.weights[m2];
                inner[m2] = if w_m2 == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let var = (batch.function_vars[[m, i]] + batch.function_vars[[m2, i]])
                        .max(ENTROPY_VAR_FLOOR);
                    w_m2.ln() + log_normal_pdf(batch.means[[m, i]], batch.means[[m2, i]], var)
                };
            }
            h -= w_m * logsumexp(&inner);
        }
        out[i] = h;
    }
    out
}

/// Baseline score: exact-GP posterior variance at each candidate.
pub fn score_single_gp_var(gp: &ExactGp, pool: ArrayView2<f64>) -> Result<Array1<f64>> {
    let (_, vars) = gp.predict_batch(pool)?;
    Ok(vars)
}
