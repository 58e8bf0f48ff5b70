//! Active learning for regression with an ensemble of random-feature
//! Gaussian-process experts.
//!
//! The model is a weighted ensemble of `M` Bayesian linear regressions, one
//! per kernel in a dictionary, each operating on a random Fourier feature
//! expansion of the inputs. Expert posteriors and model-averaging weights are
//! propagated recursively as labeled pairs arrive, so a full update costs
//! `O(M D^2)` with no matrix inversion. On top of the ensemble posterior sit
//! six acquisition rules (weighted variance, weighted entropy,
//! query-by-committee, mixture variance, a mixture-entropy lower bound, and a
//! single exact-GP variance baseline) plus an adaptive combination of the
//! ensemble-based rules driven by exponential weights on validation error.
//!
//! Crate layout mirrors the pipeline:
//!
//! * [`rff`] — random Fourier feature maps for shift-invariant kernels
//! * [`gp_expert`] — one recursive Bayesian linear-regression expert
//! * [`egp`] — the expert ensemble and its Gaussian-mixture posterior
//! * [`exact_gp`] — exact single-GP baseline and marginal-likelihood fitting
//! * [`acquisition`] — pool scoring rules and argmax selection
//! * [`multi_af`] — adaptively weighted ensemble of acquisition rules
//! * [`benchmarks`] — synthetic test functions, CSV ingestion, pool splits
//! * [`metrics`] — NMSE and NPLL on the held-out test set
//! * [`experiment`] — end-to-end drivers, aggregation, and result output

pub mod acquisition;
pub mod benchmarks;
pub mod egp;
pub mod error;
pub mod exact_gp;
pub mod experiment;
pub mod gp_expert;
pub mod linalg;
pub mod metrics;
pub mod multi_af;
pub mod rff;
pub mod util;

pub use acquisition::{AcquisitionKind, AcquisitionScores};
pub use benchmarks::{Benchmark, DataPools, SplitSpec};
pub use egp::{EnsembleState, MixturePrediction};
pub use error::{Error, Result};
pub use exact_gp::ExactGp;
pub use experiment::{ExperimentConfig, Method, RunResult, Task};
pub use gp_expert::ExpertState;
pub use metrics::IterationMetrics;
pub use multi_af::AfEnsembleState;
pub use rff::{KernelKind, KernelSpec, SpectralFeatures};
