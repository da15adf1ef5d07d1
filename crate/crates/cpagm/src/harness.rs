//! Monte Carlo benchmark harness: runs the clustering method and the
//! baselines over freshly simulated datasets and aggregates partition
//! agreement and forecast error per method.

use serde::{Deserialize, Serialize};

use crate::baselines::{gmap_baseline, gmfbc_partition, lm_baseline, lm_forest_errors};
use crate::cluster::{evaluate_test, run, CpagmConfig, ModelKind};
use crate::error::{Error, Result};
use crate::metrics::{ari, Metric};
use crate::models::ForestConfig;
use crate::par;
use crate::selection::{grid_search, GridSpec};
use crate::simulation::{
    build_scenario, scenario1, scenario2, scenario2_noisy, scenario3, ScenarioSpec, SplitPolicy,
};
use crate::types::Dataset;

/// The shipped simulation scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioId {
    S1,
    S2,
    S2Noisy,
    S3,
}

impl ScenarioId {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioId::S1 => "1",
            ScenarioId::S2 => "2",
            ScenarioId::S2Noisy => "2-noisy",
            ScenarioId::S3 => "3",
        }
    }

    pub fn spec(&self, t: usize, n: usize, seed: u64) -> ScenarioSpec {
        match self {
            ScenarioId::S1 => scenario1(t, n, seed),
            ScenarioId::S2 => scenario2(t, n, seed),
            ScenarioId::S2Noisy => scenario2_noisy(t, n, seed),
            ScenarioId::S3 => scenario3(t, n, seed),
        }
    }

    /// Scenario defaults: the true significant lag order, the reassignment
    /// policy and the model family used in the reference experiments.
    pub fn default_lag(&self) -> usize {
        match self {
            ScenarioId::S1 => 4,
            ScenarioId::S2 | ScenarioId::S2Noisy => 12,
            ScenarioId::S3 => 5,
        }
    }

    pub fn default_policy(&self) -> SplitPolicy {
        match self {
            ScenarioId::S3 => SplitPolicy::OutOfSample,
            _ => SplitPolicy::InSample,
        }
    }

    pub fn default_model(&self) -> ModelKind {
        match self {
            ScenarioId::S3 => ModelKind::Forest,
            _ => ModelKind::Linear,
        }
    }
}

impl std::str::FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(ScenarioId::S1),
            "2" => Ok(ScenarioId::S2),
            "2-noisy" => Ok(ScenarioId::S2Noisy),
            "3" => Ok(ScenarioId::S3),
            other => Err(Error::InvalidArgument(format!(
                "unknown scenario '{other}' (expected 1, 2, 2-noisy or 3)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Cpagm,
    Lm,
    Gmfbc,
    Gmap,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Cpagm => "CPAGM",
            Method::Lm => "LM",
            Method::Gmfbc => "GMFBC",
            Method::Gmap => "GMAP",
        }
    }

    pub const ALL: [Method; 4] = [Method::Cpagm, Method::Lm, Method::Gmfbc, Method::Gmap];
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cpagm" => Ok(Method::Cpagm),
            "lm" => Ok(Method::Lm),
            "gmfbc" => Ok(Method::Gmfbc),
            "gmap" => Ok(Method::Gmap),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// One benchmark cell: scenario, sizes, methods and trial count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub scenario: ScenarioId,
    pub series_length: usize,
    pub n_per_process: usize,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub metric: Metric,
    pub k: usize,
    pub lag: usize,
    pub policy: SplitPolicy,
    pub model: ModelKind,
    pub restarts: usize,
    pub gmap_reps: usize,
    /// Max AR order for the local-models baseline.
    pub lm_p_max: usize,
    pub forest: ForestConfig,
    /// Skip forecast-error evaluation and report only partition agreement
    /// (saves the per-cluster fits that only errors need).
    pub errors: bool,
}

impl BenchmarkConfig {
    pub fn new(scenario: ScenarioId, series_length: usize, n_per_process: usize) -> Self {
        BenchmarkConfig {
            scenario,
            series_length,
            n_per_process,
            trials: 50,
            seed: 7,
            methods: Method::ALL.to_vec(),
            metric: Metric::Mae,
            k: 3,
            lag: scenario.default_lag(),
            policy: scenario.default_policy(),
            model: scenario.default_model(),
            restarts: 5,
            gmap_reps: 30,
            lm_p_max: 5,
            forest: ForestConfig::default(),
            errors: true,
        }
    }

    fn cpagm_config(&self, seed: u64) -> CpagmConfig {
        CpagmConfig {
            k: self.k,
            lag: self.lag,
            split_policy: self.policy,
            model_kind: self.model,
            restarts: self.restarts,
            seed,
            forest: self.forest.clone(),
            ..CpagmConfig::new(self.k, self.lag)
        }
    }
}

/// Per-trial measurements for one method.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodTrials {
    pub ari: Vec<f64>,
    pub error: Vec<f64>,
}

/// All trials of one benchmark cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub cpagm: MethodTrials,
    pub lm: MethodTrials,
    pub gmfbc: MethodTrials,
    pub gmap: MethodTrials,
    /// Iterations per trial of the clustering runs (winning restart).
    pub cpagm_iterations: Vec<usize>,
}

/// One aggregate output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: String,
    pub t: usize,
    pub n: usize,
    pub method: String,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
    pub trials: usize,
    pub seed: u64,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

impl BenchmarkReport {
    fn trials_for(&self, method: Method) -> &MethodTrials {
        match method {
            Method::Cpagm => &self.cpagm,
            Method::Lm => &self.lm,
            Method::Gmfbc => &self.gmfbc,
            Method::Gmap => &self.gmap,
        }
    }

    /// Aggregate rows, one per `(method, measure)` actually computed.
    pub fn rows(&self) -> Vec<BenchRow> {
        let mut rows = Vec::new();
        for &method in &self.config.methods {
            let trials = self.trials_for(method);
            let mut push = |metric: &str, values: &[f64]| {
                if values.is_empty() {
                    return;
                }
                rows.push(BenchRow {
                    scenario: self.config.scenario.name().into(),
                    t: self.config.series_length,
                    n: self.config.n_per_process,
                    method: method.name().into(),
                    metric: metric.into(),
                    mean: mean(values),
                    sd: sample_sd(values),
                    trials: values.len(),
                    seed: self.config.seed,
                });
            };
            push("ari", &trials.ari);
            push(self.config.metric.name(), &trials.error);
        }
        rows
    }
}

struct TrialOutcome {
    cpagm: Option<(f64, f64, usize)>, // (ari, error, iterations)
    lm: Option<(f64, f64)>,
    gmfbc: Option<(f64, f64)>,
    gmap: Option<f64>,
}

// Stream tags separating the random streams consumed inside one trial.
const STREAM_DATA: u64 = 0;
const STREAM_CPAGM: u64 = 1;
const STREAM_LM: u64 = 2;
const STREAM_GMFBC: u64 = 3;
const STREAM_GMAP: u64 = 4;

fn run_trial(cfg: &BenchmarkConfig, trial: usize) -> Result<TrialOutcome> {
    let trial_seed = par::derive_seed(cfg.seed, trial as u64);
    let spec = cfg.scenario.spec(
        cfg.series_length,
        cfg.n_per_process,
        par::derive_seed(trial_seed, STREAM_DATA),
    );
    let (dataset, truth) = build_scenario(&spec, cfg.policy, cfg.lag)?;

    let mut outcome = TrialOutcome {
        cpagm: None,
        lm: None,
        gmfbc: None,
        gmap: None,
    };
    for &method in &cfg.methods {
        match method {
            Method::Cpagm => {
                let config = cfg.cpagm_config(par::derive_seed(trial_seed, STREAM_CPAGM));
                let result = run(&dataset, &config)?;
                let agreement = ari(&result.partition.labels, &truth)?;
                let error = if cfg.errors {
                    evaluate_test(&result, &dataset, cfg.metric)?.average
                } else {
                    f64::NAN
                };
                outcome.cpagm = Some((agreement, error, result.iterations));
            }
            Method::Lm => {
                let seed = par::derive_seed(trial_seed, STREAM_LM);
                let lm = lm_baseline(&dataset, cfg.lm_p_max, cfg.metric, cfg.k, seed)?;
                let agreement = ari(&lm.partition.labels, &truth)?;
                let error = if !cfg.errors {
                    f64::NAN
                } else if cfg.model == ModelKind::Forest {
                    // Nonlinear cells score the local approach with one
                    // forest per series; the partition still comes from the
                    // linear coefficient vectors.
                    lm_forest_errors(&dataset, cfg.lag, &cfg.forest, cfg.metric, seed)?.average
                } else {
                    lm.evaluation.average
                };
                outcome.lm = Some((agreement, error));
            }
            Method::Gmfbc => {
                let config = CpagmConfig {
                    seed: par::derive_seed(trial_seed, STREAM_GMFBC),
                    ..cfg.cpagm_config(0)
                };
                let (agreement, error) = if cfg.errors {
                    let (partition, evaluation) =
                        crate::baselines::gmfbc_baseline(&dataset, &config, cfg.metric)?;
                    (ari(&partition.labels, &truth)?, evaluation.average)
                } else {
                    let partition = gmfbc_partition(&dataset, &config)?;
                    (ari(&partition.labels, &truth)?, f64::NAN)
                };
                outcome.gmfbc = Some((agreement, error));
            }
            Method::Gmap => {
                if cfg.errors {
                    let config = CpagmConfig {
                        seed: par::derive_seed(trial_seed, STREAM_GMAP),
                        ..cfg.cpagm_config(0)
                    };
                    outcome.gmap =
                        Some(gmap_baseline(&dataset, &config, cfg.metric, cfg.gmap_reps)?);
                }
            }
        }
    }
    Ok(outcome)
}

/// Runs every trial of a benchmark cell (trials in parallel, each on a
/// freshly simulated dataset) and collects per-method measurements.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let outcomes = par::map_indexed(cfg.trials, |t| run_trial(cfg, t));
    let mut report = BenchmarkReport {
        config: cfg.clone(),
        cpagm: MethodTrials::default(),
        lm: MethodTrials::default(),
        gmfbc: MethodTrials::default(),
        gmap: MethodTrials::default(),
        cpagm_iterations: Vec::new(),
    };
    for outcome in outcomes {
        let outcome = outcome?;
        if let Some((a, e, iters)) = outcome.cpagm {
            report.cpagm.ari.push(a);
            if cfg.errors {
                report.cpagm.error.push(e);
            }
            report.cpagm_iterations.push(iters);
        }
        if let Some((a, e)) = outcome.lm {
            report.lm.ari.push(a);
            if cfg.errors {
                report.lm.error.push(e);
            }
        }
        if let Some((a, e)) = outcome.gmfbc {
            report.gmfbc.ari.push(a);
            if cfg.errors {
                report.gmfbc.error.push(e);
            }
        }
        if let Some(e) = outcome.gmap {
            report.gmap.error.push(e);
        }
    }
    Ok(report)
}

/// Iteration-behaviour study: single executions (no restarts) of the
/// clustering run, recording the iteration count and the per-iteration
/// average validation error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStudy {
    pub iterations: Vec<usize>,
    /// Average validation error (objective over n) at the first iteration,
    /// i.e. under the random initial partition.
    pub first_validation_error: Vec<f64>,
}

pub fn iteration_study(
    scenario: ScenarioId,
    series_length: usize,
    n_per_process: usize,
    runs: usize,
    seed: u64,
) -> Result<IterationStudy> {
    let lag = scenario.default_lag();
    let outcomes = par::map_indexed(runs, |t| -> Result<(usize, f64)> {
        let trial_seed = par::derive_seed(seed, t as u64);
        let spec = scenario.spec(
            series_length,
            n_per_process,
            par::derive_seed(trial_seed, STREAM_DATA),
        );
        let (dataset, _) = build_scenario(&spec, scenario.default_policy(), lag)?;
        let config = CpagmConfig {
            restarts: 1,
            seed: par::derive_seed(trial_seed, STREAM_CPAGM),
            ..CpagmConfig::new(3, lag)
        };
        let result = run(&dataset, &config)?;
        Ok((
            result.iterations,
            result.objective_trace[0] / dataset.len() as f64,
        ))
    });
    let mut study = IterationStudy {
        iterations: Vec::with_capacity(runs),
        first_validation_error: Vec::with_capacity(runs),
    };
    for o in outcomes {
        let (iters, first) = o?;
        study.iterations.push(iters);
        study.first_validation_error.push(first);
    }
    Ok(study)
}

/// Parameter-selection study: for each trial, a fresh short-memory dataset
/// is searched over the `(K, l)` grid in two-stage mode (selection on the
/// first half of the test block) and the chosen pair is recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStudy {
    pub selected: Vec<(usize, usize)>,
}

impl SelectionStudy {
    pub fn fraction_matching(&self, predicate: impl Fn(usize, usize) -> bool) -> f64 {
        let hits = self.selected.iter().filter(|&&(k, l)| predicate(k, l)).count();
        hits as f64 / self.selected.len() as f64
    }
}

pub fn selection_study(trials: usize, seed: u64) -> Result<SelectionStudy> {
    let selected = par::map_indexed(trials, |t| -> Result<(usize, usize)> {
        let trial_seed = par::derive_seed(seed, t as u64);
        let spec = scenario1(100, 5, par::derive_seed(trial_seed, STREAM_DATA));
        let (dataset, _) = build_scenario(&spec, SplitPolicy::InSample, 4)?;
        let grid = GridSpec {
            k_values: (1..=6).collect(),
            l_values: (1..=4).collect(),
            metric: Metric::Mae,
            template: CpagmConfig::new(1, 1)
                .with_seed(par::derive_seed(trial_seed, STREAM_CPAGM)),
            selection_horizon: Some(4),
        };
        let outcome = grid_search(&dataset, &grid)?;
        Ok((outcome.best_k, outcome.best_l))
    });
    Ok(SelectionStudy {
        selected: selected.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

/// Convenience wrapper: a dataset plus ground truth for one scenario trial,
/// seeded the same way the benchmark derives its trial datasets.
pub fn trial_dataset(
    cfg: &BenchmarkConfig,
    trial: usize,
) -> Result<(Dataset, Vec<usize>)> {
    let trial_seed = par::derive_seed(cfg.seed, trial as u64);
    let spec = cfg.scenario.spec(
        cfg.series_length,
        cfg.n_per_process,
        par::derive_seed(trial_seed, STREAM_DATA),
    );
    build_scenario(&spec, cfg.policy, cfg.lag)
}
