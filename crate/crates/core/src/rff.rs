//! Random Fourier feature maps for shift-invariant kernels.
//!
//! A standardized kernel `k(x - x')` is the Fourier transform of a spectral
//! density over frequencies. Drawing `D` i.i.d. frequencies from that density
//! and stacking `sin`/`cos` projections gives a `2D`-dimensional feature map
//! whose inner product is a Monte Carlo estimate of the kernel. For the RBF
//! kernel with lengthscale `l` the spectral density is an isotropic Gaussian
//! with per-coordinate standard deviation `1/l`.
//!
//! Feature layout is fixed: entries are interleaved as
//! `(1/sqrt(D)) [sin(z_1.x), cos(z_1.x), ..., sin(z_D.x), cos(z_D.x)]`,
//! so serialized states are comparable across implementations. The squared
//! norm of every feature vector is identically 1.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Kernel family of a dictionary entry. Only the RBF family ships; the enum
/// leaves room for other shift-invariant kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum KernelKind {
    Rbf,
}

/// One dictionary kernel: family, lengthscale, and output-scale variance so
/// that the full kernel is `magnitude_sigma2 * k_standardized`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub lengthscale: f64,
    pub magnitude_sigma2: f64,
}

impl KernelSpec {
    pub fn rbf(lengthscale: f64, magnitude_sigma2: f64) -> Result<Self> {
        if !(lengthscale > 0.0) || !lengthscale.is_finite() {
            return Err(Error::parameter(format!(
                "lengthscale must be positive and finite, got {lengthscale}"
            )));
        }
        if !(magnitude_sigma2 > 0.0) || !magnitude_sigma2.is_finite() {
            return Err(Error::parameter(format!(
                "magnitude_sigma2 must be positive and finite, got {magnitude_sigma2}"
            )));
        }
        Ok(KernelSpec {
            kind: KernelKind::Rbf,
            lengthscale,
            magnitude_sigma2,
        })
    }

    /// Standardized (unit-magnitude) kernel value at separation `x - y`.
    pub fn standardized_value(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
        match self.kind {
            KernelKind::Rbf => {
                let sq: f64 = x
                    .iter()
                    .zip(y.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (-sq / (2.0 * self.lengthscale * self.lengthscale)).exp()
            }
        }
    }

    /// Full kernel value including the magnitude factor.
    pub fn value(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
        self.magnitude_sigma2 * self.standardized_value(x, y)
    }
}

/// Frozen spectral frequencies defining one feature map. Immutable after
/// construction and safe to share read-only across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFeatures {
    /// `D x d`, one frequency vector per row.
    frequencies: Array2<f64>,
}

/// A `D x d` matrix of standard-normal draws, deterministic in `seed`.
///
/// Drawing the base once per experiment and rescaling per expert gives common
/// random numbers across the dictionary, which removes spurious Monte Carlo
/// differences from the weight comparisons.
pub fn draw_standard_normal_base(dim: usize, num_features: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut base = Array2::<f64>::zeros((num_features, dim));
    for v in base.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    base
}

impl SpectralFeatures {
    /// Draw `num_features` frequencies from the spectral density of the
    /// standardized kernel: i.i.d. Gaussian with std `1/lengthscale`.
    pub fn draw(spec: &KernelSpec, dim: usize, num_features: usize, seed: u64) -> Result<Self> {
        if !(spec.lengthscale > 0.0) || !spec.lengthscale.is_finite() {
            return Err(Error::parameter(format!(
                "lengthscale must be positive and finite, got {}",
                spec.lengthscale
            )));
        }
        if dim == 0 || num_features == 0 {
            return Err(Error::parameter(
                "input dimension and feature count must be at least 1",
            ));
        }
        let base = draw_standard_normal_base(dim, num_features, seed);
        Self::from_base(&base, spec.lengthscale)
    }

    /// Scale a shared standard-normal base into frequencies for one
    /// lengthscale.
    pub fn from_base(base: &Array2<f64>, lengthscale: f64) -> Result<Self> {
        if !(lengthscale > 0.0) || !lengthscale.is_finite() {
            return Err(Error::parameter(format!(
                "lengthscale must be positive and finite, got {lengthscale}"
            )));
        }
        Ok(SpectralFeatures {
            frequencies: base / lengthscale,
        })
    }

    /// Wrap explicit frequencies (used by checkpoint loading and tests).
    pub fn from_frequencies(frequencies: Array2<f64>) -> Result<Self> {
        if frequencies.nrows() == 0 || frequencies.ncols() == 0 {
            return Err(Error::parameter("frequencies matrix must be nonempty"));
        }
        Ok(SpectralFeatures { frequencies })
    }

    pub fn num_features(&self) -> usize {
        self.frequencies.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.frequencies.ncols()
    }

    /// Length of the feature vectors produced by [`Self::feature_map`].
    pub fn output_dim(&self) -> usize {
        2 * self.num_features()
    }

    pub fn frequencies(&self) -> &Array2<f64> {
        &self.frequencies
    }

    /// Map `x` to the interleaved `sin`/`cos` feature vector of length `2D`.
    pub fn feature_map(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let d = self.num_features();
        let scale = 1.0 / (d as f64).sqrt();
        let mut out = Array1::<f64>::zeros(2 * d);
        for (j, freq) in self.frequencies.rows().into_iter().enumerate() {
            let proj = freq.dot(&x);
            out[2 * j] = proj.sin() * scale;
            out[2 * j + 1] = proj.cos() * scale;
        }
        Ok(out)
    }

    /// Feature vectors for every row of `xs`, stacked as an `n x 2D` matrix.
    pub fn feature_map_batch(&self, xs: &Array2<f64>) -> Result<Array2<f64>> {
        if xs.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: xs.ncols(),
            });
        }
        let d = self.num_features();
        let scale = 1.0 / (d as f64).sqrt();
        // projections: n x D
        let proj = xs.dot(&self.frequencies.t());
        let mut out = Array2::<f64>::zeros((xs.nrows(), 2 * d));
        for (mut row, prow) in out.rows_mut().into_iter().zip(proj.rows()) {
            for (j, &p) in prow.iter().enumerate() {
                row[2 * j] = p.sin() * scale;
                row[2 * j + 1] = p.cos() * scale;
            }
        }
        Ok(out)
    }

    /// Monte Carlo kernel estimate `phi(x)^T phi(y)`, always in `[-1, 1]`.
    pub fn approx_kernel(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
        let fx = self.feature_map(x)?;
        let fy = self.feature_map(y)?;
        Ok(fx.dot(&fy))
    }
}
