//! Command-line interface: simulation, clustering, grid search, baselines,
//! the Monte Carlo benchmark and standalone metric scoring.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
//! Diagnostics go to standard error; results go to files or standard output.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::cluster::{run, CpagmConfig, ModelKind};
use crate::error::{Error, Result};
use crate::harness::{run_benchmark, BenchmarkConfig, Method, ScenarioId};
use crate::io as fileio;
use crate::metrics::Metric;
use crate::models::ForestConfig;
use crate::selection::{grid_search, GridSpec};
use crate::simulation::{build_scenario, ScenarioSpec, SplitPolicy};
use crate::types::Dataset;

#[derive(Debug, Parser)]
#[command(
    name = "cpagm",
    version,
    about = "Time series clustering by prediction accuracy of pooled global forecasting models"
)]
struct Cli {
    /// Worker threads for data-parallel loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

fn parse_policy(s: &str) -> std::result::Result<SplitPolicy, String> {
    match s {
        "in-sample" => Ok(SplitPolicy::InSample),
        "out-of-sample" => Ok(SplitPolicy::OutOfSample),
        other => Err(format!("unknown policy '{other}' (in-sample|out-of-sample)")),
    }
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    match s {
        "linear" => Ok(ModelKind::Linear),
        "forest" => Ok(ModelKind::Forest),
        other => Err(format!("unknown model '{other}' (linear|forest)")),
    }
}

fn parse_metric(s: &str) -> std::result::Result<Metric, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Options shared by every command that reads a dataset file.
#[derive(Debug, Args)]
struct DataArgs {
    /// Long-form dataset CSV (series_id,t,value).
    #[arg(long)]
    data: PathBuf,

    /// Companion metadata JSON (per-series seasonal period and split).
    #[arg(long)]
    metadata: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, short)]
    k: usize,

    /// Autoregressive order of the global models.
    #[arg(long, short)]
    lag: usize,

    #[arg(long, value_parser = parse_policy, default_value = "in-sample")]
    policy: SplitPolicy,

    #[arg(long, value_parser = parse_model, default_value = "linear")]
    model: ModelKind,

    #[arg(long, default_value_t = 5)]
    restarts: usize,

    #[arg(long, default_value_t = 30)]
    max_iter: usize,

    #[arg(long, default_value_t = 3)]
    patience: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Trees per forest (forest model only).
    #[arg(long, default_value_t = 100)]
    trees: usize,
}

impl RunArgs {
    fn config(&self) -> CpagmConfig {
        CpagmConfig {
            k: self.k,
            lag: self.lag,
            max_iter: self.max_iter,
            patience: self.patience,
            restarts: self.restarts,
            split_policy: self.policy,
            model_kind: self.model,
            seed: self.seed,
            forest: ForestConfig {
                n_trees: self.trees,
                ..ForestConfig::default()
            },
            ..CpagmConfig::new(self.k, self.lag)
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a simulated dataset from a scenario spec JSON.
    Simulate {
        /// Scenario spec JSON (processes, series length, seed, ...).
        #[arg(long)]
        spec: PathBuf,

        /// Output dataset CSV.
        #[arg(long)]
        out: PathBuf,

        /// Output metadata JSON (default: <out>.meta.json).
        #[arg(long)]
        metadata_out: Option<PathBuf>,

        /// Optional ground-truth labels CSV (series_id,label).
        #[arg(long)]
        labels_out: Option<PathBuf>,

        #[arg(long, value_parser = parse_policy, default_value = "in-sample")]
        policy: SplitPolicy,

        /// Lag order the splits are laid out for (default: the scenario's
        /// significant lags).
        #[arg(long)]
        lag: Option<usize>,
    },

    /// Cluster a dataset and write the result JSON.
    Cluster {
        #[command(flatten)]
        data: DataArgs,

        #[command(flatten)]
        run: RunArgs,

        /// Result JSON path (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Grid search over (K, l); writes the ranked table CSV and the best
    /// result JSON.
    Gridsearch {
        #[command(flatten)]
        data: DataArgs,

        /// Comma-separated candidate cluster counts, e.g. 1,2,3.
        #[arg(long, value_delimiter = ',')]
        k_values: Vec<usize>,

        /// Comma-separated candidate lag orders, e.g. 1,2,4.
        #[arg(long, value_delimiter = ',')]
        l_values: Vec<usize>,

        #[arg(long, value_parser = parse_metric, default_value = "mae")]
        metric: Metric,

        #[arg(long, value_parser = parse_policy, default_value = "in-sample")]
        policy: SplitPolicy,

        #[arg(long, value_parser = parse_model, default_value = "linear")]
        model: ModelKind,

        #[arg(long, default_value_t = 5)]
        restarts: usize,

        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Two-stage mode: select on the first H1 test observations and
        /// report the winner's error on the rest.
        #[arg(long)]
        selection_horizon: Option<usize>,

        /// Ranked grid table CSV.
        #[arg(long)]
        table_out: PathBuf,

        /// Best cell's clustering result JSON (default: standard output).
        #[arg(long)]
        best_out: Option<PathBuf>,
    },

    /// Run one comparison baseline (lm, gmap or gmfbc).
    Baseline {
        #[arg(long)]
        method: String,

        #[command(flatten)]
        data: DataArgs,

        #[arg(long, short)]
        k: usize,

        #[arg(long, short)]
        lag: usize,

        #[arg(long, value_parser = parse_metric, default_value = "mae")]
        metric: Metric,

        #[arg(long, value_parser = parse_model, default_value = "linear")]
        model: ModelKind,

        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Max AR order for the local-models baseline.
        #[arg(long, default_value_t = 5)]
        p_max: usize,

        /// Monte Carlo repetitions for the random-partition baseline.
        #[arg(long, default_value_t = 30)]
        mc_reps: usize,

        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Scenario grid x methods x trials; writes the aggregate CSV.
    Benchmark {
        /// Scenario: 1, 2, 2-noisy or 3.
        #[arg(long)]
        scenario: ScenarioId,

        /// Series length.
        #[arg(long = "T")]
        t: usize,

        /// Series per generating process.
        #[arg(long = "N")]
        n: usize,

        #[arg(long, default_value_t = 50)]
        trials: usize,

        #[arg(long, default_value_t = 7)]
        seed: u64,

        #[arg(long, value_delimiter = ',', default_value = "cpagm,lm,gmfbc,gmap")]
        methods: Vec<Method>,

        #[arg(long, value_parser = parse_metric, default_value = "mae")]
        metric: Metric,

        #[arg(long, short)]
        k: Option<usize>,

        #[arg(long, short)]
        lag: Option<usize>,

        #[arg(long, value_parser = parse_policy)]
        policy: Option<SplitPolicy>,

        #[arg(long, value_parser = parse_model)]
        model: Option<ModelKind>,

        #[arg(long, default_value_t = 5)]
        restarts: usize,

        #[arg(long, default_value_t = 30)]
        gmap_reps: usize,

        #[arg(long, default_value_t = 5)]
        p_max: usize,

        /// Aggregate CSV path (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Score forecasts against actuals (both long-form CSV).
    Metrics {
        /// Actual values CSV (series_id,t,value).
        #[arg(long)]
        actual: PathBuf,

        /// Forecast values CSV (series_id,t,value), t relative to the
        /// forecast origin.
        #[arg(long)]
        forecast: PathBuf,

        #[arg(long, value_parser = parse_metric, default_value = "mae")]
        metric: Metric,

        /// Pre-forecast history CSV, required for the scaled-error metric.
        #[arg(long)]
        history: Option<PathBuf>,

        /// Seasonal period applied to every history series.
        #[arg(long, default_value_t = 1)]
        seasonal_period: usize,
    },
}

/// Parses `argv` and runs the selected command, returning the process exit
/// code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here with a zero status.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli.threads;
    let outcome = with_thread_pool(threads, || dispatch(cli.command));
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => 1,
        Error::MalformedData(_) | Error::Io { .. } | Error::InsufficientHistory(_)
        | Error::DuplicateCollapse(_) => 2,
        Error::DegenerateScale(_) | Error::Numerical(_) => 3,
    }
}

#[cfg(feature = "parallel")]
fn with_thread_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        None => f(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .expect("thread pool")
            .install(f),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_thread_pool<R>(threads: Option<usize>, f: impl FnOnce() -> R) -> R {
    if threads.is_some() {
        eprintln!("note: built without the parallel feature; --threads is ignored");
    }
    f()
}

fn read_data(args: &DataArgs, lag: usize) -> Result<Dataset> {
    fileio::read_dataset(&args.data, args.metadata.as_deref(), lag)
}

fn emit_json<T: serde::Serialize>(payload: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fileio::write_json(payload, path),
        None => {
            let text = serde_json::to_string_pretty(payload)
                .map_err(|e| Error::MalformedData(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            spec,
            out,
            metadata_out,
            labels_out,
            policy,
            lag,
        } => {
            let text = std::fs::read_to_string(&spec).map_err(|e| Error::io(&spec, e))?;
            let scenario: ScenarioSpec = serde_json::from_str(&text)
                .map_err(|e| Error::MalformedData(format!("{}: {e}", spec.display())))?;
            let lag = lag.unwrap_or_else(|| scenario.kind.significant_lags().max(1));
            let (dataset, labels) = build_scenario(&scenario, policy, lag)?;
            fileio::write_dataset(&dataset, &out)?;
            let metadata_out =
                metadata_out.unwrap_or_else(|| out.with_extension("meta.json"));
            fileio::write_metadata(&dataset, &metadata_out)?;
            if let Some(path) = labels_out {
                let mut text = String::from("series_id,label\n");
                for (s, l) in dataset.series().iter().zip(&labels) {
                    text.push_str(&format!("{},{l}\n", s.id));
                }
                std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            }
            eprintln!(
                "wrote {} series to {} (metadata: {})",
                dataset.len(),
                out.display(),
                metadata_out.display()
            );
            Ok(())
        }

        Command::Cluster { data, run: args, out } => {
            let dataset = read_data(&data, args.lag)?;
            let result = run(&dataset, &args.config())?;
            eprintln!(
                "converged: {:?} after {} iterations, objective {:.6} ({:.6}/series), cluster sizes {:?}",
                result.converged,
                result.iterations,
                result.j_opt,
                result.j_opt_per_series(),
                result.partition.cluster_sizes()
            );
            emit_json(&result, out.as_deref())
        }

        Command::Gridsearch {
            data,
            k_values,
            l_values,
            metric,
            policy,
            model,
            restarts,
            seed,
            selection_horizon,
            table_out,
            best_out,
        } => {
            // In-sample cells re-derive their validation window per lag, so
            // the base dataset only needs a feasible default.
            let dataset = read_data(&data, l_values.iter().copied().min().unwrap_or(1))?;
            let template = CpagmConfig {
                restarts,
                seed,
                split_policy: policy,
                model_kind: model,
                ..CpagmConfig::new(1, 1)
            };
            let grid = GridSpec {
                k_values,
                l_values,
                metric,
                template,
                selection_horizon,
            };
            let outcome = grid_search(&dataset, &grid)?;
            fileio::write_grid_csv(&outcome.table, &table_out)?;
            eprintln!(
                "best cell (K={}, l={}) with {} {:.6}{}",
                outcome.best_k,
                outcome.best_l,
                metric.name(),
                outcome.best_error,
                match outcome.evaluation_error {
                    Some(e) => format!(", evaluation error {e:.6}"),
                    None => String::new(),
                }
            );
            // The table already lives in the CSV; the JSON carries the
            // winning cell's full clustering result (its config echoes K
            // and l).
            emit_json(&outcome.best, best_out.as_deref())
        }

        Command::Baseline {
            method,
            data,
            k,
            lag,
            metric,
            model,
            seed,
            p_max,
            mc_reps,
            out,
        } => {
            let dataset = read_data(&data, lag)?;
            let config = CpagmConfig {
                seed,
                model_kind: model,
                ..CpagmConfig::new(k, lag)
            };
            match method.as_str() {
                "lm" => {
                    let outcome = crate::baselines::lm_baseline(&dataset, p_max, metric, k, seed)?;
                    eprintln!(
                        "LM: average {} {:.6} ({} excluded), cluster sizes {:?}",
                        metric.name(),
                        outcome.evaluation.average,
                        outcome.evaluation.excluded,
                        outcome.partition.cluster_sizes()
                    );
                    emit_json(&outcome, out.as_deref())
                }
                "gmap" => {
                    let average = crate::baselines::gmap_baseline(&dataset, &config, metric, mc_reps)?;
                    eprintln!("GMAP: average {} {average:.6} over {mc_reps} partitions", metric.name());
                    emit_json(&serde_json::json!({"method": "GMAP", "metric": metric.name(), "average": average, "mc_reps": mc_reps, "seed": seed}), out.as_deref())
                }
                "gmfbc" => {
                    let (partition, evaluation) =
                        crate::baselines::gmfbc_baseline(&dataset, &config, metric)?;
                    eprintln!(
                        "GMFBC: average {} {:.6}, cluster sizes {:?}",
                        metric.name(),
                        evaluation.average,
                        partition.cluster_sizes()
                    );
                    emit_json(
                        &serde_json::json!({"method": "GMFBC", "labels": partition.labels, "k": partition.k, "metric": metric.name(), "average": evaluation.average, "per_series": evaluation.per_series, "seed": seed}),
                        out.as_deref(),
                    )
                }
                other => Err(Error::InvalidArgument(format!(
                    "unknown baseline '{other}' (lm|gmap|gmfbc)"
                ))),
            }
        }

        Command::Benchmark {
            scenario,
            t,
            n,
            trials,
            seed,
            methods,
            metric,
            k,
            lag,
            policy,
            model,
            restarts,
            gmap_reps,
            p_max,
            out,
        } => {
            let mut cfg = BenchmarkConfig::new(scenario, t, n);
            cfg.trials = trials;
            cfg.seed = seed;
            cfg.methods = methods;
            cfg.metric = metric;
            cfg.restarts = restarts;
            cfg.gmap_reps = gmap_reps;
            cfg.lm_p_max = p_max;
            if let Some(k) = k {
                cfg.k = k;
            }
            if let Some(lag) = lag {
                cfg.lag = lag;
            }
            if let Some(policy) = policy {
                cfg.policy = policy;
            }
            if let Some(model) = model {
                cfg.model = model;
            }
            let report = run_benchmark(&cfg)?;
            let rows = report.rows();
            match out {
                Some(path) => {
                    fileio::write_benchmark_csv(&rows, &path)?;
                    eprintln!("wrote {} rows to {}", rows.len(), path.display());
                }
                None => {
                    let mut stdout = std::io::stdout().lock();
                    writeln!(stdout, "scenario,T,N,method,metric,mean,sd,trials,seed")
                        .map_err(|e| Error::io("stdout", e))?;
                    for r in &rows {
                        writeln!(
                            stdout,
                            "{},{},{},{},{},{},{},{},{}",
                            r.scenario, r.t, r.n, r.method, r.metric, r.mean, r.sd, r.trials, r.seed
                        )
                        .map_err(|e| Error::io("stdout", e))?;
                    }
                }
            }
            Ok(())
        }

        Command::Metrics {
            actual,
            forecast,
            metric,
            history,
            seasonal_period,
        } => {
            let actuals = read_series_map(&actual)?;
            let forecasts = read_series_map(&forecast)?;
            let histories = history.as_deref().map(read_series_map).transpose()?;
            if metric == Metric::Mase && histories.is_none() {
                return Err(Error::InvalidArgument(
                    "the scaled-error metric needs --history".into(),
                ));
            }
            let mut scores = Vec::new();
            for (id, actual_values) in &actuals {
                let predicted = find_series(&forecasts, id).ok_or_else(|| {
                    Error::MalformedData(format!("forecast file is missing series '{id}'"))
                })?;
                let history_values = match &histories {
                    None => actual_values.clone(),
                    Some(h) => find_series(h, id)
                        .ok_or_else(|| {
                            Error::MalformedData(format!("history file is missing series '{id}'"))
                        })?
                        .clone(),
                };
                let history =
                    crate::types::TimeSeries::new(id.clone(), history_values, seasonal_period)?;
                match metric.score(actual_values, predicted, &history) {
                    Ok(v) => scores.push((id.clone(), Some(v))),
                    Err(Error::DegenerateScale(_)) => scores.push((id.clone(), None)),
                    Err(e) => return Err(e),
                }
            }
            println!("series_id,metric,value");
            for (id, score) in &scores {
                match score {
                    Some(v) => println!("{id},{},{v}", metric.name()),
                    None => println!("{id},{},", metric.name()),
                }
            }
            let kept: Vec<f64> = scores.iter().filter_map(|(_, v)| *v).collect();
            if kept.is_empty() {
                return Err(Error::DegenerateScale(
                    "every series had an undefined score".into(),
                ));
            }
            println!("_average_,{},{}", metric.name(), kept.iter().sum::<f64>() / kept.len() as f64);
            Ok(())
        }
    }
}

/// Reads a long-form CSV into (id -> values), keeping file order of ids.
fn read_series_map(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::MalformedData(format!("{}: {e}", path.display())))?;
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for row in reader.deserialize::<(String, usize, f64)>() {
        let (id, _t, value) = row
            .map_err(|e| Error::MalformedData(format!("{}: {e}", path.display())))?;
        match out.iter_mut().find(|(existing, _)| *existing == id) {
            Some((_, values)) => values.push(value),
            None => out.push((id, vec![value])),
        }
    }
    if out.is_empty() {
        return Err(Error::MalformedData(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(out)
}

fn find_series<'a>(series: &'a [(String, Vec<f64>)], id: &str) -> Option<&'a Vec<f64>> {
    series.iter().find(|(k, _)| k == id).map(|(_, v)| v)
}
