//! Adaptive ensemble of acquisition functions.
//!
//! Instead of committing to one acquisition rule, keep `K` of them with
//! exponential weights. Each iteration every rule nominates its own
//! candidate; the candidate is pseudo-labeled with the ensemble's consensus
//! mean and rolled out on a *clone* of the model; the clone's squared error
//! on the validation set scores that rule; the weights take an exponentiated
//! penalty step on those scores; and the actual query maximizes the
//! weight-averaged, min-max-normalized score vectors.
//!
//! Everything here is side-effect free on the model state: the caller owns
//! the true-label update after the query is chosen.

use ndarray::{Array1, Array2, ArrayView1};

use crate::acquisition::{self, AcquisitionKind};
use crate::egp::EnsembleState;
use crate::error::{Error, Result};
use crate::util::{argmax, logsumexp};

/// Exponential-weights state over `K` acquisition rules.
#[derive(Debug, Clone)]
pub struct AfEnsembleState {
    kinds: Vec<AcquisitionKind>,
    /// Normalized log weights (`logsumexp == 0`), length `K`.
    log_omega: Array1<f64>,
    eta: f64,
}

impl AfEnsembleState {
    /// Uniform weights over the given rules. `eta` is the learning rate of
    /// the exponential update; zero freezes the weights.
    pub fn new(kinds: Vec<AcquisitionKind>, eta: f64) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::parameter(
                "acquisition ensemble needs at least one rule",
            ));
        }
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::parameter(format!(
                "learning rate must be finite and nonnegative, got {eta}"
            )));
        }
        let k = kinds.len();
        Ok(AfEnsembleState {
            kinds,
            log_omega: Array1::from_elem(k, -(k as f64).ln()),
            eta,
        })
    }

    /// All five ensemble-based rules with uniform weights.
    pub fn all_rules(eta: f64) -> Result<Self> {
        Self::new(AcquisitionKind::ALL.to_vec(), eta)
    }

    pub fn kinds(&self) -> &[AcquisitionKind] {
        &self.kinds
    }

    pub fn num_rules(&self) -> usize {
        self.kinds.len()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn log_omega(&self) -> &Array1<f64> {
        &self.log_omega
    }

    pub fn omega(&self) -> Array1<f64> {
        self.log_omega.mapv(f64::exp)
    }

    /// Exponentiated penalty step: `log w_k <- log w_k - eta * err_k`, then
    /// renormalize. Equal errors (or `eta = 0`) leave the weights unchanged.
    pub fn update_weights(&mut self, errors: &[f64]) -> Result<()> {
        if errors.len() != self.kinds.len() {
            return Err(Error::DimensionMismatch {
                expected: self.kinds.len(),
                got: errors.len(),
            });
        }
        if errors.iter().any(|e| !e.is_finite()) {
            return Err(Error::numerical(
                "validation errors must be finite for the weight update",
            ));
        }
        for (lw, &e) in self.log_omega.iter_mut().zip(errors.iter()) {
            *lw -= self.eta * e;
        }
        let norm = logsumexp(self.log_omega.as_slice().unwrap());
        self.log_omega -= norm;
        Ok(())
    }
}

/// Each rule's favorite pool position (index into scoring order, ties to
/// the lowest index). Duplicates across rules are fine.
pub fn candidate_points(
    en: &EnsembleState,
    afs: &AfEnsembleState,
    pool_x: &Array2<f64>,
) -> Result<Vec<usize>> {
    let batch = en.predict_batch(pool_x)?;
    Ok(afs
        .kinds()
        .iter()
        .map(|&k| acquisition::score(k, &batch).select())
        .collect())
}

/// The ensemble's consensus mean at `x`: the stand-in label for rollouts.
pub fn pseudo_label(en: &EnsembleState, x: ArrayView1<f64>) -> Result<f64> {
    en.consensus_mean(x)
}

/// Clone the ensemble, feed it the pseudo-labeled candidate, and return its
/// mean squared error on the validation set (consensus predictions under the
/// rolled-out weights). The original ensemble is untouched.
pub fn rollout_and_score(
    en: &EnsembleState,
    x_tilde: ArrayView1<f64>,
    y_tilde: f64,
    val_x: &Array2<f64>,
    val_y: ArrayView1<f64>,
) -> Result<f64> {
    if val_x.nrows() == 0 {
        return Err(Error::parameter(
            "rollout scoring needs a nonempty validation set",
        ));
    }
    if val_x.nrows() != val_y.len() {
        return Err(Error::DimensionMismatch {
            expected: val_x.nrows(),
            got: val_y.len(),
        });
    }
    let mut rolled = en.clone();
    rolled.update(x_tilde, y_tilde)?;
    let preds = rolled.predict_batch(val_x)?.consensus_means();
    let err: f64 = preds
        .iter()
        .zip(val_y.iter())
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / val_y.len() as f64;
    Ok(err)
}

/// Min-max normalize a score vector to `[0, 1]`; constant vectors (no
/// preference) map to all zeros.
pub fn min_max_normalize(scores: &Array1<f64>) -> Array1<f64> {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Array1::zeros(scores.len());
    }
    scores.mapv(|v| (v - min) / (max - min))
}

/// Argmax of the omega-weighted sum of normalized score vectors.
pub fn combined_select_from_scores(omega: &Array1<f64>, score_vecs: &[Array1<f64>]) -> usize {
    let n = score_vecs[0].len();
    let mut combined = Array1::<f64>::zeros(n);
    for (&w, scores) in omega.iter().zip(score_vecs.iter()) {
        combined.scaled_add(w, &min_max_normalize(scores));
    }
    argmax(combined.as_slice().expect("contiguous combined scores"))
}

/// Score the pool with every rule and pick the combined argmax under the
/// current weights.
pub fn combined_select(
    en: &EnsembleState,
    afs: &AfEnsembleState,
    pool_x: &Array2<f64>,
) -> Result<usize> {
    let batch = en.predict_batch(pool_x)?;
    let score_vecs: Vec<Array1<f64>> = afs
        .kinds()
        .iter()
        .map(|&k| acquisition::score(k, &batch).values)
        .collect();
    Ok(combined_select_from_scores(&afs.omega(), &score_vecs))
}

/// Everything one adaptive step decided, for the experiment trace.
#[derive(Debug, Clone)]
pub struct MultiAfStep {
    /// Per-rule candidate positions in scoring order.
    pub candidates: Vec<usize>,
    /// Per-rule validation errors from the rollouts.
    pub errors: Vec<f64>,
    /// Weights after the exponential update (the ones used for selection).
    pub omega_after: Vec<f64>,
    /// Chosen pool position in scoring order.
    pub chosen: usize,
}

/// One full adaptive iteration up to (but not including) the true-label
/// query: nominate, pseudo-label, roll out, reweight, and select. Mutates
/// only the rule weights; the model is read-only here.
pub fn multi_af_step(
    en: &EnsembleState,
    afs: &mut AfEnsembleState,
    pool_x: &Array2<f64>,
    val_x: &Array2<f64>,
    val_y: ArrayView1<f64>,
) -> Result<MultiAfStep> {
    if pool_x.nrows() == 0 {
        return Err(Error::parameter("candidate pool is empty"));
    }
    let batch = en.predict_batch(pool_x)?;
    let score_vecs: Vec<Array1<f64>> = afs
        .kinds()
        .iter()
        .map(|&k| acquisition::score(k, &batch).values)
        .collect();
    let candidates: Vec<usize> = score_vecs
        .iter()
        .map(|v| argmax(v.as_slice().expect("contiguous scores")))
        .collect();

    let mut errors = Vec::with_capacity(candidates.len());
    for &c in &candidates {
        let y_tilde = batch.at(c).consensus_mean();
        errors.push(rollout_and_score(en, pool_x.row(c), y_tilde, val_x, val_y)?);
    }

    afs.update_weights(&errors)?;
    let omega = afs.omega();
    let chosen = combined_select_from_scores(&omega, &score_vecs);
    Ok(MultiAfStep {
        candidates,
        errors,
        omega_after: omega.to_vec(),
        chosen,
    })
}
