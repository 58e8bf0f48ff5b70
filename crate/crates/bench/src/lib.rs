//! Shared fixtures for the criterion benchmarks: seeded ensembles and pools
//! of candidate inputs, sized like a typical experiment iteration.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use egpal::egp::{log_lengthscale_dictionary, EnsembleState};
use egpal::gp_expert::ExpertState;
use egpal::rff::{KernelSpec, SpectralFeatures};

pub const NOISE_VAR: f64 = 1e-2;

fn smooth_target(x: &[f64]) -> f64 {
    x.iter().map(|v| (2.0 * v).sin()).sum::<f64>()
}

/// Uniformly drawn points in `[-1, 1]^dim`.
pub fn pool(dim: usize, n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, dim), |_| rng.gen_range(-1.0..1.0))
}

/// A single random-feature expert with `n_obs` observations absorbed.
pub fn conditioned_expert(dim: usize, num_features: usize, n_obs: usize) -> ExpertState {
    let spec = KernelSpec::rbf(1.0, 1.0).unwrap();
    let features = SpectralFeatures::draw(&spec, dim, num_features, 7).unwrap();
    let mut expert = ExpertState::new(features, 1.0, NOISE_VAR).unwrap();
    let x = pool(dim, n_obs, 11);
    for row in x.rows() {
        let y = smooth_target(row.as_slice().unwrap());
        expert.update(row, y).unwrap();
    }
    expert
}

/// A full lengthscale-dictionary ensemble conditioned on `n_obs` observations.
pub fn conditioned_ensemble(dim: usize, num_features: usize, n_obs: usize) -> EnsembleState {
    let dictionary = log_lengthscale_dictionary(-4, 6);
    let mut en =
        EnsembleState::from_dictionary(&dictionary, dim, num_features, NOISE_VAR, 13).unwrap();
    let x = pool(dim, n_obs, 17);
    for row in x.rows() {
        let y = smooth_target(row.as_slice().unwrap());
        en.update(row, y).unwrap();
    }
    en
}

/// Labels for a pool under the same smooth target the fixtures train on.
pub fn labels(x: &Array2<f64>) -> Array1<f64> {
    Array1::from_iter(x.rows().into_iter().map(|r| smooth_target(r.as_slice().unwrap())))
}
