//! End-to-end active-learning experiments: configuration, the two driver
//! loops (single acquisition rule vs. adaptive rule ensemble), baselines,
//! multi-realization aggregation, and result files.
//!
//! A run is a set of independent realizations. Realization `i` derives its
//! seed as `config.seed + i`; from that one seed flow the pool split, the
//! random-feature base, and the random-baseline selection stream, so a
//! (config, seed) pair fixes every output byte except the recorded wall
//! time the run happened to take.
//!
//! Per realization: draw pools, grid-fit kernel hyperparameters on the
//! initial labeled set, build the model (the expert dictionary inherits the
//! fitted magnitude and noise), condition it on the initial labels, then
//! alternate select-query-update for `T` iterations, recording test-set
//! metrics at every step including `t = 0`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::acquisition::{self, AcquisitionKind};
use crate::benchmarks::{
    load_csv, make_pools_dataset, make_pools_synthetic, Benchmark, DataPools, RawDataset,
    SplitSpec,
};
use crate::egp::EnsembleState;
use crate::error::{Error, Result};
use crate::exact_gp::{fit_hyperparameters_default, ExactGp, HyperFit};
use crate::metrics::{nmse, npll_exact, npll_mixture, test_label_variance, IterationMetrics};
use crate::multi_af::{multi_af_step, AfEnsembleState};
use crate::rff::KernelSpec;
use crate::util::argmax;

/// What to learn: a synthetic oracle or a user-supplied CSV.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Task {
    Synthetic(Benchmark),
    Dataset {
        path: PathBuf,
        target_column: String,
    },
}

impl Task {
    /// Interpret a CLI/config `task` string: a known benchmark name, or a
    /// path to a CSV (which then needs a target column).
    pub fn parse(spec: &str, target_column: Option<&str>) -> Result<Self> {
        if let Ok(b) = spec.parse::<Benchmark>() {
            return Ok(Task::Synthetic(b));
        }
        if spec.ends_with(".csv") {
            let target = target_column.ok_or_else(|| {
                Error::config(format!(
                    "task '{spec}' is a CSV; a target column must be named"
                ))
            })?;
            return Ok(Task::Dataset {
                path: PathBuf::from(spec),
                target_column: target.to_owned(),
            });
        }
        Err(Error::config(format!(
            "task '{spec}' is neither a benchmark name nor a .csv path"
        )))
    }

    pub fn label(&self) -> String {
        match self {
            Task::Synthetic(b) => b.name().to_owned(),
            Task::Dataset { path, .. } => path.display().to_string(),
        }
    }

    /// Default exponential-update learning rate for the adaptive rule
    /// ensemble. The rougher landscape gets the gentler rate.
    pub fn default_eta(&self) -> f64 {
        match self {
            Task::Synthetic(Benchmark::Ackley5) => 1.0,
            Task::Synthetic(_) => 100.0,
            Task::Dataset { .. } => 1.0,
        }
    }
}

/// Selection strategy for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Method {
    /// Ensemble model, one fixed acquisition rule.
    EgpSingle(AcquisitionKind),
    /// Ensemble model, adaptive ensemble of rules.
    EgpMultiAf,
    /// Exact-GP posterior variance baseline.
    GpVar,
    /// Ensemble model, uniformly random queries.
    Random,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::EgpSingle(AcquisitionKind::WVar),
        Method::EgpSingle(AcquisitionKind::WEnt),
        Method::EgpSingle(AcquisitionKind::Qbc),
        Method::EgpSingle(AcquisitionKind::GpmVar),
        Method::EgpSingle(AcquisitionKind::GpmEnt),
        Method::EgpMultiAf,
        Method::GpVar,
        Method::Random,
    ];

    pub fn name(&self) -> String {
        match self {
            Method::EgpSingle(k) => format!("egp-{}", k.name()),
            Method::EgpMultiAf => "egp-multiafs".to_owned(),
            Method::GpVar => "gp-var".to_owned(),
            Method::Random => "random".to_owned(),
        }
    }

    /// Does this method maintain the expert ensemble (vs. the exact GP)?
    pub fn uses_ensemble(&self) -> bool {
        !matches!(self, Method::GpVar)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("egp-") {
            if rest == "multiafs" {
                return Ok(Method::EgpMultiAf);
            }
            if let Ok(kind) = rest.parse::<AcquisitionKind>() {
                return Ok(Method::EgpSingle(kind));
            }
        }
        match s {
            "gp-var" => Ok(Method::GpVar),
            "random" => Ok(Method::Random),
            other => Err(Error::parameter(format!(
                "unknown method '{other}' (expected one of {})",
                Method::ALL.map(|m| m.name()).join(", ")
            ))),
        }
    }
}

/// Everything one experiment needs. Build with [`ExperimentConfig::new`]
/// for the documented defaults, then adjust fields.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub method: Method,
    /// Random features per expert (`D`; the weight vector has length `2D`).
    pub num_features: usize,
    /// Dictionary lengthscales are `10^c` for `c` in this inclusive range.
    pub ls_exponent_lo: i32,
    pub ls_exponent_hi: i32,
    /// Learning rate of the adaptive rule ensemble.
    pub eta: f64,
    /// Queries per realization (`T`); metrics are recorded at `T + 1`
    /// points including the initial model.
    pub iterations: usize,
    pub num_realizations: usize,
    pub seed: u64,
    pub split: SplitSpec,
    /// Observation noise override; `None` grid-fits it on the initial set.
    pub noise_var: Option<f64>,
    /// Prior magnitude override; `None` grid-fits it on the initial set.
    pub magnitude: Option<f64>,
    /// Rules available to the adaptive ensemble.
    pub multi_af_kinds: Vec<AcquisitionKind>,
}

impl ExperimentConfig {
    pub fn new(task: Task, method: Method) -> Self {
        let eta = task.default_eta();
        ExperimentConfig {
            task,
            method,
            num_features: 50,
            ls_exponent_lo: -4,
            ls_exponent_hi: 6,
            eta,
            iterations: 50,
            num_realizations: 10,
            seed: 0,
            split: SplitSpec::synthetic_default(),
            noise_var: None,
            magnitude: None,
            multi_af_kinds: AcquisitionKind::ALL.to_vec(),
        }
    }

    pub fn num_experts(&self) -> usize {
        (self.ls_exponent_hi - self.ls_exponent_lo + 1) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_features == 0 {
            return Err(Error::config("num_features must be at least 1"));
        }
        if self.ls_exponent_lo > self.ls_exponent_hi {
            return Err(Error::config(format!(
                "lengthscale exponent range [{}, {}] is empty",
                self.ls_exponent_lo, self.ls_exponent_hi
            )));
        }
        if self.num_realizations == 0 {
            return Err(Error::config("num_realizations must be at least 1"));
        }
        if self.iterations > self.split.n_pool {
            return Err(Error::config(format!(
                "iteration budget {} exceeds the unlabeled pool size {}",
                self.iterations, self.split.n_pool
            )));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::config(format!(
                "eta must be finite and nonnegative, got {}",
                self.eta
            )));
        }
        if let Some(nv) = self.noise_var {
            if !(nv > 0.0) || !nv.is_finite() {
                return Err(Error::config(format!(
                    "noise_var override must be positive and finite, got {nv}"
                )));
            }
        }
        if let Some(mag) = self.magnitude {
            if !(mag > 0.0) || !mag.is_finite() {
                return Err(Error::config(format!(
                    "magnitude override must be positive and finite, got {mag}"
                )));
            }
        }
        if self.method == Method::EgpMultiAf {
            if self.multi_af_kinds.is_empty() {
                return Err(Error::config(
                    "the adaptive method needs at least one acquisition rule",
                ));
            }
            if self.split.n_validation == 0 {
                return Err(Error::config(
                    "the adaptive method needs a nonempty validation set",
                ));
            }
        }
        self.split.validate().map_err(|e| match e {
            Error::Parameter(msg) => Error::Config(msg),
            other => other,
        })
    }

    /// The expert dictionary: one RBF kernel per lengthscale decade, all
    /// sharing `magnitude`.
    pub fn dictionary(&self, magnitude: f64) -> Result<Vec<KernelSpec>> {
        (self.ls_exponent_lo..=self.ls_exponent_hi)
            .map(|c| KernelSpec::rbf(10f64.powi(c), magnitude))
            .collect()
    }
}

/// Adaptive-ensemble bookkeeping for one iteration, in pool-row ids.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MultiAfTraceRecord {
    pub t: usize,
    /// Rule weights after this iteration's update.
    pub omega: Vec<f64>,
    /// Each rule's candidate pool row.
    pub candidate_rows: Vec<usize>,
    /// Each rule's rollout validation error.
    pub errors: Vec<f64>,
    pub chosen_row: usize,
}

/// Everything one realization produced.
#[derive(Debug, Clone)]
pub struct RealizationResult {
    pub seed: u64,
    /// `T + 1` entries (fewer only if the pool ran dry).
    pub metrics: Vec<IterationMetrics>,
    /// Original pool row of each query, in order.
    pub queried_rows: Vec<usize>,
    pub af_trace: Option<Vec<MultiAfTraceRecord>>,
    pub truncated: bool,
}

/// A full run: realizations plus aggregate curves.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub realizations: Vec<RealizationResult>,
    pub mean_nmse: Vec<f64>,
    pub std_nmse: Vec<f64>,
    pub mean_npll: Vec<f64>,
    pub std_npll: Vec<f64>,
    pub runtime_s: f64,
}

/// Pointwise mean and sample standard deviation across realizations,
/// truncated to the shortest curve.
pub fn aggregate(curves: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    if curves.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    let mut means = Vec::with_capacity(len);
    let mut stds = Vec::with_capacity(len);
    for t in 0..len {
        let column: Vec<f64> = curves.iter().map(|c| c[t]).collect();
        let mean = column.iter().sum::<f64>() / column.len() as f64;
        means.push(mean);
        stds.push(crate::util::sample_std(&column));
    }
    (means, stds)
}

/// The per-realization model state, either route.
enum ModelState {
    Ensemble(EnsembleState),
    Exact {
        kernel: KernelSpec,
        noise_var: f64,
        gp: ExactGp,
    },
}

struct RealizationContext {
    pools: DataPools,
    model: ModelState,
    sigma2_y: f64,
    selection_rng: ChaCha8Rng,
}

/// Derive the sub-seeds a realization consumes, in a fixed documented
/// order: pool split, random-feature base, random-baseline selection.
fn derive_seeds(realization_seed: u64) -> (u64, u64, u64) {
    let mut master = ChaCha8Rng::seed_from_u64(realization_seed);
    let split_seed = master.gen::<u64>();
    let rf_seed = master.gen::<u64>();
    let selection_seed = master.gen::<u64>();
    (split_seed, rf_seed, selection_seed)
}

fn prepare_realization(
    cfg: &ExperimentConfig,
    dataset: Option<&RawDataset>,
    realization_seed: u64,
) -> Result<RealizationContext> {
    let (split_seed, rf_seed, selection_seed) = derive_seeds(realization_seed);
    let pools = match (&cfg.task, dataset) {
        (Task::Synthetic(b), _) => make_pools_synthetic(*b, &cfg.split, split_seed)?,
        (Task::Dataset { .. }, Some(raw)) => {
            make_pools_dataset(&raw.features, raw.targets.view(), &cfg.split, split_seed)?
        }
        (Task::Dataset { .. }, None) => {
            return Err(Error::config("dataset task without loaded data"))
        }
    };
    let sigma2_y = test_label_variance(pools.test_y.view())?;

    // One grid fit on the initial labeled set decides the kernel scale and
    // observation noise for both model routes; config overrides win.
    let hyper: HyperFit =
        fit_hyperparameters_default(&pools.labeled_x, pools.labeled_y.view())?;
    let magnitude = cfg.magnitude.unwrap_or(hyper.kernel.magnitude_sigma2);
    let noise_var = cfg.noise_var.unwrap_or(hyper.noise_var);

    let model = if cfg.method.uses_ensemble() {
        let dict = cfg.dictionary(magnitude)?;
        let mut en = EnsembleState::from_dictionary(
            &dict,
            pools.input_dim(),
            cfg.num_features,
            noise_var,
            rf_seed,
        )?;
        // Condition on the initial labels through the same recursion the
        // loop uses; the weights become the experts' posterior given L0.
        let x0 = pools.labeled_x.clone();
        let y0 = pools.labeled_y.clone();
        for (row, &y) in x0.rows().into_iter().zip(y0.iter()) {
            en.update(row, y)?;
        }
        ModelState::Ensemble(en)
    } else {
        let kernel = KernelSpec::rbf(hyper.kernel.lengthscale, magnitude)?;
        let gp = ExactGp::fit(kernel, noise_var, &pools.labeled_x, pools.labeled_y.view())?;
        ModelState::Exact {
            kernel,
            noise_var,
            gp,
        }
    };
    // Pool ownership audit: nothing consumed during setup.
    assert_eq!(pools.num_unlabeled(), cfg.split.n_pool);
    assert_eq!(pools.num_labeled(), cfg.split.n_initial);

    Ok(RealizationContext {
        pools,
        model,
        sigma2_y,
        selection_rng: ChaCha8Rng::seed_from_u64(selection_seed),
    })
}

fn evaluate_model(
    ctx: &RealizationContext,
    t: usize,
    wall_ms: f64,
) -> Result<IterationMetrics> {
    let (nmse_v, npll_v) = match &ctx.model {
        ModelState::Ensemble(en) => {
            let batch = en.predict_batch(&ctx.pools.test_x)?;
            let preds = batch.consensus_means();
            (
                nmse(preds.view(), ctx.pools.test_y.view(), ctx.sigma2_y)?,
                npll_mixture(en, ctx.pools.test_x.view(), ctx.pools.test_y.view())?,
            )
        }
        ModelState::Exact { gp, .. } => {
            let (means, _) = gp.predict_batch(ctx.pools.test_x.view())?;
            (
                nmse(means.view(), ctx.pools.test_y.view(), ctx.sigma2_y)?,
                npll_exact(gp, ctx.pools.test_x.view(), ctx.pools.test_y.view())?,
            )
        }
    };
    Ok(IterationMetrics {
        t,
        nmse: nmse_v,
        npll: npll_v,
        wall_ms,
    })
}

fn run_realization(
    cfg: &ExperimentConfig,
    dataset: Option<&RawDataset>,
    realization_seed: u64,
) -> Result<RealizationResult> {
    let start = Instant::now();
    let mut ctx = prepare_realization(cfg, dataset, realization_seed)?;
    let initial_labeled = ctx.pools.num_labeled();
    let initial_pool = ctx.pools.num_unlabeled();

    let mut metrics = Vec::with_capacity(cfg.iterations + 1);
    let mut queried_rows = Vec::with_capacity(cfg.iterations);
    let mut af_trace = if cfg.method == Method::EgpMultiAf {
        Some(Vec::with_capacity(cfg.iterations))
    } else {
        None
    };
    let mut afs = if cfg.method == Method::EgpMultiAf {
        Some(AfEnsembleState::new(cfg.multi_af_kinds.clone(), cfg.eta)?)
    } else {
        None
    };
    metrics.push(evaluate_model(
        &ctx,
        0,
        start.elapsed().as_secs_f64() * 1e3,
    )?);

    let mut truncated = false;
    for t in 1..=cfg.iterations {
        if ctx.pools.num_unlabeled() == 0 {
            truncated = true;
            break;
        }
        let iter_start = Instant::now();
        let pool_x = ctx.pools.unlabeled_x();

        // Pick a live-pool position according to the method.
        let position = match (&cfg.method, &mut ctx.model) {
            (Method::EgpSingle(kind), ModelState::Ensemble(en)) => {
                let batch = en.predict_batch(&pool_x)?;
                acquisition::score(*kind, &batch).select()
            }
            (Method::EgpMultiAf, ModelState::Ensemble(en)) => {
                let step = multi_af_step(
                    en,
                    afs.as_mut().expect("adaptive state"),
                    &pool_x,
                    &ctx.pools.val_x,
                    ctx.pools.val_y.view(),
                )?;
                let live = ctx.pools.live_indices();
                af_trace.as_mut().expect("trace").push(MultiAfTraceRecord {
                    t,
                    omega: step.omega_after.clone(),
                    candidate_rows: step.candidates.iter().map(|&p| live[p]).collect(),
                    errors: step.errors.clone(),
                    chosen_row: live[step.chosen],
                });
                step.chosen
            }
            (Method::Random, ModelState::Ensemble(_)) => {
                ctx.selection_rng.gen_range(0..ctx.pools.num_unlabeled())
            }
            (Method::GpVar, ModelState::Exact { gp, .. }) => {
                let scores = acquisition::score_single_gp_var(gp, pool_x.view())?;
                argmax(scores.as_slice().expect("contiguous scores"))
            }
            _ => unreachable!("model state matches method"),
        };

        let acquired = ctx.pools.acquire(position)?;
        queried_rows.push(acquired.pool_row);

        match &mut ctx.model {
            ModelState::Ensemble(en) => {
                en.update(acquired.x.view(), acquired.y)?;
            }
            ModelState::Exact {
                kernel,
                noise_var,
                gp,
            } => {
                // Hyperparameters stay at their t=0 fit; only the posterior
                // absorbs the grown labeled set.
                *gp = ExactGp::fit(
                    *kernel,
                    *noise_var,
                    &ctx.pools.labeled_x,
                    ctx.pools.labeled_y.view(),
                )?;
            }
        }

        assert_eq!(ctx.pools.num_labeled(), initial_labeled + t);
        assert_eq!(ctx.pools.num_unlabeled(), initial_pool - t);
        metrics.push(evaluate_model(
            &ctx,
            t,
            iter_start.elapsed().as_secs_f64() * 1e3,
        )?);
    }

    Ok(RealizationResult {
        seed: realization_seed,
        metrics,
        queried_rows,
        af_trace,
        truncated,
    })
}

fn run_with_method_check(cfg: &ExperimentConfig, want_multi: bool) -> Result<RunResult> {
    cfg.validate()?;
    let is_multi = cfg.method == Method::EgpMultiAf;
    if is_multi != want_multi {
        return Err(Error::config(if want_multi {
            "this driver runs the adaptive rule-ensemble method only"
        } else {
            "the adaptive method must go through the rule-ensemble driver"
        }));
    }
    let start = Instant::now();
    let dataset = match &cfg.task {
        Task::Dataset {
            path,
            target_column,
        } => Some(load_csv(path, target_column)?),
        Task::Synthetic(_) => None,
    };

    let realizations: Vec<RealizationResult> = (0..cfg.num_realizations)
        .into_par_iter()
        .map(|i| run_realization(cfg, dataset.as_ref(), cfg.seed + i as u64))
        .collect::<Result<Vec<_>>>()?;

    let nmse_curves: Vec<Vec<f64>> = realizations
        .iter()
        .map(|r| r.metrics.iter().map(|m| m.nmse).collect())
        .collect();
    let npll_curves: Vec<Vec<f64>> = realizations
        .iter()
        .map(|r| r.metrics.iter().map(|m| m.npll).collect())
        .collect();
    let (mean_nmse, std_nmse) = aggregate(&nmse_curves);
    let (mean_npll, std_npll) = aggregate(&npll_curves);

    Ok(RunResult {
        config: cfg.clone(),
        realizations,
        mean_nmse,
        std_nmse,
        mean_npll,
        std_npll,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Drive a single-rule or baseline method for the configured realizations.
pub fn run_fixed_policy(cfg: &ExperimentConfig) -> Result<RunResult> {
    run_with_method_check(cfg, false)
}

/// Drive the adaptive rule-ensemble method.
pub fn run_adaptive_policy(cfg: &ExperimentConfig) -> Result<RunResult> {
    run_with_method_check(cfg, true)
}

/// Dispatch on the configured method.
pub fn run(cfg: &ExperimentConfig) -> Result<RunResult> {
    if cfg.method == Method::EgpMultiAf {
        run_adaptive_policy(cfg)
    } else {
        run_fixed_policy(cfg)
    }
}

/// One `iteration,method,seed,nmse,npll` table over several runs (e.g. a
/// method comparison). Rows appear run by run, realization by realization,
/// so the file is bit-identical across reruns of the same configs.
pub fn write_joined_csv(results: &[&RunResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(["iteration", "method", "seed", "nmse", "npll"])
        .map_err(csv_io)?;
    for result in results {
        let method = result.config.method.name();
        for r in &result.realizations {
            for m in &r.metrics {
                w.write_record([
                    m.t.to_string(),
                    method.clone(),
                    r.seed.to_string(),
                    m.nmse.to_string(),
                    m.npll.to_string(),
                ])
                .map_err(csv_io)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

impl RunResult {
    /// Per-iteration rows for this run alone; see [`write_joined_csv`].
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_joined_csv(&[self], path)
    }

    /// JSON summary: config echo, aggregate curves, query/weight traces,
    /// and the total runtime. The runtime is the only field that varies
    /// between identical runs.
    pub fn write_summary_json(&self, path: &Path) -> Result<()> {
        #[derive(serde::Serialize)]
        struct Summary<'a> {
            config: &'a ExperimentConfig,
            realization_seeds: Vec<u64>,
            truncated: bool,
            mean_nmse: &'a [f64],
            std_nmse: &'a [f64],
            mean_npll: &'a [f64],
            std_npll: &'a [f64],
            queried_rows: Vec<&'a [usize]>,
            af_traces: Vec<&'a [MultiAfTraceRecord]>,
            runtime_s: f64,
        }
        let summary = Summary {
            config: &self.config,
            realization_seeds: self.realizations.iter().map(|r| r.seed).collect(),
            truncated: self.realizations.iter().any(|r| r.truncated),
            mean_nmse: &self.mean_nmse,
            std_nmse: &self.std_nmse,
            mean_npll: &self.mean_npll,
            std_npll: &self.std_npll,
            queried_rows: self
                .realizations
                .iter()
                .map(|r| r.queried_rows.as_slice())
                .collect(),
            af_traces: self
                .realizations
                .iter()
                .map(|r| r.af_trace.as_deref().unwrap_or(&[]))
                .collect(),
            runtime_s: self.runtime_s,
        };
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), &summary)
            .map_err(|e| Error::numerical(format!("JSON serialization failed: {e}")))?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
