//! `egpal` — run active-learning experiments from the command line.
//!
//! Subcommands:
//! * `run`             one task × one method, CSV + JSON results
//! * `compare`         one task × several methods, joined CSV
//! * `fit`             hyperparameter fit report for a task's initial set
//! * `list-benchmarks` the built-in synthetic functions
//!
//! `run` and `compare` accept a flat `key = value` config file; any flag
//! given on the command line overrides the file. Exit codes: 0 success,
//! 2 bad usage or configuration, 3 numerical failure, 1 I/O trouble.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use egpal::acquisition::AcquisitionKind;
use egpal::benchmarks::{make_pools_synthetic, Benchmark, SplitSpec};
use egpal::egp::EnsembleState;
use egpal::exact_gp::fit_hyperparameters_default;
use egpal::experiment::{self, ExperimentConfig, Method, RunResult, Task};
use egpal::{Error, Result};

#[derive(Parser)]
#[command(
    name = "egpal",
    version,
    about = "Active learning with an ensemble of random-feature GP experts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write <output>.csv / <output>.json.
    Run(RunArgs),
    /// Run several methods on one task and write a joined CSV table.
    Compare(CompareArgs),
    /// Grid-fit kernel hyperparameters on a task's initial labeled set.
    Fit(FitArgs),
    /// List the built-in synthetic benchmarks.
    ListBenchmarks,
}

/// Flags shared by `run` and `compare`; every field mirrors a config-file
/// key of the same name (see README for the schema).
#[derive(Args, Debug, Default, Clone)]
struct CommonArgs {
    /// Flat key = value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmark name (see list-benchmarks) or path to a CSV file.
    #[arg(long)]
    task: Option<String>,
    /// Target column name when the task is a CSV file.
    #[arg(long, value_name = "NAME")]
    target_column: Option<String>,
    /// Queries per realization (T).
    #[arg(long)]
    iters: Option<usize>,
    /// Number of independent realizations.
    #[arg(long)]
    seeds: Option<usize>,
    /// Base seed; realization i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Random features per expert (D).
    #[arg(long)]
    features: Option<usize>,
    /// Learning rate of the adaptive acquisition ensemble.
    #[arg(long)]
    eta: Option<f64>,
    /// Observation noise variance; omitted = grid-fit on the initial set.
    #[arg(long)]
    noise_var: Option<f64>,
    /// Kernel magnitude; omitted = grid-fit on the initial set.
    #[arg(long)]
    magnitude: Option<f64>,
    /// Smallest dictionary lengthscale exponent (lengthscales are 10^c).
    #[arg(long)]
    ls_lo: Option<i32>,
    /// Largest dictionary lengthscale exponent.
    #[arg(long)]
    ls_hi: Option<i32>,
    /// Initial labeled set size.
    #[arg(long)]
    n_initial: Option<usize>,
    /// Validation set size.
    #[arg(long)]
    n_validation: Option<usize>,
    /// Unlabeled pool size.
    #[arg(long)]
    n_pool: Option<usize>,
    /// Test set size.
    #[arg(long)]
    n_test: Option<usize>,
    /// Comma-separated rules for the adaptive method
    /// (wvar,went,qbc,gpm-var,gpm-ent).
    #[arg(long, value_name = "LIST")]
    af_kinds: Option<String>,
    /// Output path prefix for result files.
    #[arg(long)]
    output: Option<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Selection method (egp-wvar, egp-went, egp-qbc, egp-gpm-var,
    /// egp-gpm-ent, egp-multiafs, gp-var, random).
    #[arg(long)]
    method: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Comma-separated methods; defaults to all eight.
    #[arg(long, value_name = "LIST")]
    methods: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Benchmark name or path to a CSV file.
    #[arg(long)]
    task: String,
    /// Target column name when the task is a CSV file.
    #[arg(long, value_name = "NAME")]
    target_column: Option<String>,
    /// Seed for the pool draw/split the fit runs on.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial labeled set size (the fitting data).
    #[arg(long)]
    n_initial: Option<usize>,
    /// Save the fitted ensemble, conditioned on the initial set, as a
    /// binary checkpoint.
    #[arg(long, value_name = "PATH")]
    save_model: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Fit(args) => cmd_fit(args),
        Command::ListBenchmarks => cmd_list_benchmarks(),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

/// `key = value` lines; `#` starts a comment; keys match the long flags.
fn parse_config_file(path: &PathBuf) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(format!(
                "{}:{}: expected 'key = value', got '{line}'",
                path.display(),
                lineno + 1
            )));
        };
        entries.push((key.trim().to_owned(), value.trim().to_owned()));
    }
    Ok(entries)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::config(format!("config key '{key}': {e}")))
}

/// Fold config-file entries into the flag struct; flags already set on the
/// command line win.
fn apply_config_file(args: &mut CommonArgs, method: &mut Option<String>) -> Result<()> {
    let Some(path) = args.config.clone() else {
        return Ok(());
    };
    for (key, value) in parse_config_file(&path)? {
        match key.as_str() {
            "task" => set_if_unset(&mut args.task, value),
            "target-column" => set_if_unset(&mut args.target_column, value),
            "method" => set_if_unset(method, value),
            "iters" => set_parsed(&mut args.iters, &key, &value)?,
            "seeds" => set_parsed(&mut args.seeds, &key, &value)?,
            "seed" => set_parsed(&mut args.seed, &key, &value)?,
            "features" => set_parsed(&mut args.features, &key, &value)?,
            "eta" => set_parsed(&mut args.eta, &key, &value)?,
            "noise-var" => set_parsed(&mut args.noise_var, &key, &value)?,
            "magnitude" => set_parsed(&mut args.magnitude, &key, &value)?,
            "ls-lo" => set_parsed(&mut args.ls_lo, &key, &value)?,
            "ls-hi" => set_parsed(&mut args.ls_hi, &key, &value)?,
            "n-initial" => set_parsed(&mut args.n_initial, &key, &value)?,
            "n-validation" => set_parsed(&mut args.n_validation, &key, &value)?,
            "n-pool" => set_parsed(&mut args.n_pool, &key, &value)?,
            "n-test" => set_parsed(&mut args.n_test, &key, &value)?,
            "af-kinds" => set_if_unset(&mut args.af_kinds, value),
            "output" => set_if_unset(&mut args.output, value),
            other => {
                return Err(Error::config(format!(
                    "unknown config key '{other}' in {}",
                    path.display()
                )))
            }
        }
    }
    Ok(())
}

fn set_if_unset(slot: &mut Option<String>, value: String) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

fn set_parsed<T: std::str::FromStr>(slot: &mut Option<T>, key: &str, value: &str) -> Result<()>
where
    T::Err: std::fmt::Display,
{
    if slot.is_none() {
        *slot = Some(parse_value(key, value)?);
    }
    Ok(())
}

fn parse_af_kinds(list: &str) -> Result<Vec<AcquisitionKind>> {
    list.split(',')
        .map(|s| s.trim().parse::<AcquisitionKind>())
        .collect()
}

fn build_config(common: &CommonArgs, method: Method) -> Result<ExperimentConfig> {
    let task_spec = common
        .task
        .as_deref()
        .ok_or_else(|| Error::config("no task given (flag --task or config key 'task')"))?;
    let task = Task::parse(task_spec, common.target_column.as_deref())?;
    let mut cfg = ExperimentConfig::new(task, method);
    if let Some(v) = common.iters {
        cfg.iterations = v;
    }
    if let Some(v) = common.seeds {
        cfg.num_realizations = v;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.features {
        cfg.num_features = v;
    }
    if let Some(v) = common.eta {
        cfg.eta = v;
    }
    cfg.noise_var = common.noise_var.or(cfg.noise_var);
    cfg.magnitude = common.magnitude.or(cfg.magnitude);
    if let Some(v) = common.ls_lo {
        cfg.ls_exponent_lo = v;
    }
    if let Some(v) = common.ls_hi {
        cfg.ls_exponent_hi = v;
    }
    if let Some(v) = common.n_initial {
        cfg.split.n_initial = v;
    }
    if let Some(v) = common.n_validation {
        cfg.split.n_validation = v;
    }
    if let Some(v) = common.n_pool {
        cfg.split.n_pool = v;
    }
    if let Some(v) = common.n_test {
        cfg.split.n_test = v;
    }
    if let Some(list) = &common.af_kinds {
        cfg.multi_af_kinds = parse_af_kinds(list)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_prefix(common: &CommonArgs) -> String {
    common.output.clone().unwrap_or_else(|| "results".to_owned())
}

fn final_value(curve: &[f64]) -> f64 {
    curve.last().copied().unwrap_or(f64::NAN)
}

fn print_run_summary(result: &RunResult) {
    println!(
        "{}: {} realizations x {} iterations, final mean NMSE {:.6}, final mean NPLL {:.3} \
         ({:.2}s)",
        result.config.method.name(),
        result.realizations.len(),
        result.config.iterations,
        final_value(&result.mean_nmse),
        final_value(&result.mean_npll),
        result.runtime_s,
    );
}

fn cmd_run(mut args: RunArgs) -> Result<()> {
    apply_config_file(&mut args.common, &mut args.method)?;
    let method: Method = args
        .method
        .as_deref()
        .ok_or_else(|| Error::config("no method given (flag --method or config key 'method')"))?
        .parse()?;
    let cfg = build_config(&args.common, method)?;
    let result = experiment::run(&cfg)?;
    let prefix = output_prefix(&args.common);
    let csv_path = PathBuf::from(format!("{prefix}.csv"));
    let json_path = PathBuf::from(format!("{prefix}.json"));
    result.write_csv(&csv_path)?;
    result.write_summary_json(&json_path)?;
    print_run_summary(&result);
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn cmd_compare(mut args: CompareArgs) -> Result<()> {
    let mut no_method = None;
    apply_config_file(&mut args.common, &mut no_method)?;
    let methods: Vec<Method> = match &args.methods {
        Some(list) => list
            .split(',')
            .map(|s| s.trim().parse::<Method>())
            .collect::<Result<_>>()?,
        None => Method::ALL.to_vec(),
    };
    if methods.is_empty() {
        return Err(Error::config("empty method list"));
    }
    let mut results = Vec::with_capacity(methods.len());
    for method in methods {
        let cfg = build_config(&args.common, method)?;
        let result = experiment::run(&cfg)?;
        print_run_summary(&result);
        results.push(result);
    }
    let prefix = output_prefix(&args.common);
    let csv_path = PathBuf::from(format!("{prefix}.csv"));
    let refs: Vec<&RunResult> = results.iter().collect();
    experiment::write_joined_csv(&refs, &csv_path)?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let task = Task::parse(&args.task, args.target_column.as_deref())?;
    let mut split = SplitSpec::synthetic_default();
    if let Some(n) = args.n_initial {
        split.n_initial = n;
    }
    let pools = match &task {
        Task::Synthetic(b) => make_pools_synthetic(*b, &split, args.seed)?,
        Task::Dataset {
            path,
            target_column,
        } => {
            let raw = egpal::benchmarks::load_csv(path, target_column)?;
            egpal::benchmarks::make_pools_dataset(
                &raw.features,
                raw.targets.view(),
                &split,
                args.seed,
            )?
        }
    };
    let fit = fit_hyperparameters_default(&pools.labeled_x, pools.labeled_y.view())?;
    println!("task: {}", task.label());
    println!("fitting points: {}", pools.num_labeled());
    println!("lengthscale: {}", fit.kernel.lengthscale);
    println!("magnitude: {}", fit.kernel.magnitude_sigma2);
    println!("noise variance: {}", fit.noise_var);
    println!("log marginal likelihood: {:.6}", fit.log_marginal);

    if let Some(path) = args.save_model {
        let cfg = ExperimentConfig::new(task, Method::EgpSingle(AcquisitionKind::WVar));
        let dict = cfg.dictionary(fit.kernel.magnitude_sigma2)?;
        let mut en = EnsembleState::from_dictionary(
            &dict,
            pools.input_dim(),
            cfg.num_features,
            fit.noise_var,
            args.seed,
        )?;
        for (row, &y) in pools.labeled_x.rows().into_iter().zip(pools.labeled_y.iter()) {
            en.update(row, y)?;
        }
        en.save(&path)?;
        println!("saved ensemble checkpoint to {}", path.display());
    }
    Ok(())
}

fn cmd_list_benchmarks() -> Result<()> {
    for b in Benchmark::ALL {
        let box_desc: Vec<String> = b
            .bounds()
            .iter()
            .map(|(lo, hi)| format!("[{lo}, {hi}]"))
            .collect();
        println!("{:<10} d={}  box={}", b.name(), b.input_dim(), box_desc.join(" x "));
    }
    Ok(())
}
