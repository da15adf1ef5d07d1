//! The core clustering iteration: per-cluster prototype fitting, error-based
//! reassignment, the validation-error objective, an anti-cycling stop rule,
//! and final test-set evaluation.
//!
//! Because new prototypes are fitted every iteration, the objective is not
//! guaranteed to decrease monotonically; the run therefore tracks the
//! objective per iteration and returns the partition with the minimum
//! recorded value, stopping either at an assignment fixed point, when the
//! objective has not improved for `patience` consecutive iterations, or at
//! `max_iter`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::models::{fit_global_forest, fit_global_linear, forecast, Forecaster, ForestConfig, GlobalModel};
use crate::par;
use crate::simulation::SplitPolicy;
use crate::types::{Dataset, Partition, SplitSpec, TimeSeries};

/// Which regression family backs the cluster prototypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Forest,
}

/// The reassignment distance. Mean absolute error is the only supported
/// choice: each assignment compares forecasts of a single series, so its
/// units are the series' own and no scaling is needed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReassignmentMetric {
    #[default]
    Mae,
}

/// How a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convergence {
    /// The assignment reproduced itself.
    FixedPoint,
    /// No objective improvement for `patience` consecutive iterations.
    Patience,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpagmConfig {
    pub k: usize,
    pub lag: usize,
    pub max_iter: usize,
    pub patience: usize,
    pub restarts: usize,
    pub split_policy: SplitPolicy,
    pub model_kind: ModelKind,
    #[serde(default)]
    pub reassignment_metric: ReassignmentMetric,
    pub seed: u64,
    /// Tree-ensemble hyperparameters, used when `model_kind` is `Forest`.
    /// Its seed field is ignored; fit seeds derive from `seed`.
    #[serde(default)]
    pub forest: ForestConfig,
}

impl CpagmConfig {
    pub fn new(k: usize, lag: usize) -> Self {
        CpagmConfig {
            k,
            lag,
            max_iter: 30,
            patience: 3,
            restarts: 5,
            split_policy: SplitPolicy::InSample,
            model_kind: ModelKind::Linear,
            reassignment_metric: ReassignmentMetric::Mae,
            seed: 0,
            forest: ForestConfig::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_policy(mut self, policy: SplitPolicy) -> Self {
        self.split_policy = policy;
        self
    }

    pub fn with_model(mut self, kind: ModelKind) -> Self {
        self.model_kind = kind;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.lag == 0 || self.max_iter == 0 || self.patience == 0 || self.restarts == 0 {
            return Err(Error::InvalidArgument(
                "k, lag, max_iter, patience and restarts must all be >= 1".into(),
            ));
        }
        if self.patience > self.max_iter {
            return Err(Error::InvalidArgument(format!(
                "patience {} exceeds max_iter {}",
                self.patience, self.max_iter
            )));
        }
        if self.k > n {
            return Err(Error::InvalidArgument(format!(
                "k={} exceeds the number of series n={n}",
                self.k
            )));
        }
        Ok(())
    }
}

/// Outcome of a clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpagmResult {
    pub partition: Partition,
    /// Final prototypes, refitted on train plus validation of the returned
    /// partition. `None` marks a cluster that ended empty.
    pub prototypes: Vec<Option<GlobalModel>>,
    /// Objective value (sum of per-series validation errors) per iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    /// Minimum of the objective trace; the returned partition attains it.
    pub j_opt: f64,
    pub converged: Convergence,
    pub config: CpagmConfig,
    /// Seed of the restart that produced this result.
    pub restart_seed: u64,
}

impl CpagmResult {
    /// Average optimal prediction error `J_opt / n`.
    pub fn j_opt_per_series(&self) -> f64 {
        self.j_opt / self.partition.labels.len() as f64
    }
}

/// Forecast error of `model` over the validation period of one series.
///
/// In-sample policy: one-step-ahead predictions at each validation point
/// using the true lagged values (fitted errors). Out-of-sample policy: a
/// recursive forecast of the whole validation block starting from the
/// observations before it. Either way the result is the mean absolute error.
pub fn distance_to_model(
    series: &TimeSeries,
    split: &SplitSpec,
    model: &GlobalModel,
    policy: SplitPolicy,
) -> Result<f64> {
    let v = split.validation;
    if v.is_empty() || v.end > series.len() {
        return Err(Error::InvalidArgument(format!(
            "series '{}': validation range {}..{} is invalid",
            series.id, v.start, v.end
        )));
    }
    let lag = model.lag_order();
    match policy {
        SplitPolicy::InSample => {
            if v.start < lag + 1 {
                return Err(Error::InsufficientHistory(format!(
                    "series '{}': validation starts at {} but lag {lag} needs index >= {}",
                    series.id,
                    v.start,
                    lag + 1
                )));
            }
            let mut total = 0.0;
            for t in v.as_slice_range() {
                let predicted = model.predict_window(&series.values[t - lag..t]);
                total += (series.values[t] - predicted).abs();
            }
            Ok(total / v.len() as f64)
        }
        SplitPolicy::OutOfSample => {
            let history = &series.values[..v.start - 1];
            if history.len() < lag {
                return Err(Error::InsufficientHistory(format!(
                    "series '{}': {} observations before validation but lag is {lag}",
                    series.id,
                    history.len()
                )));
            }
            let predicted = forecast(model, history, v.len())?;
            crate::metrics::mae(&series.values[v.as_slice_range()], &predicted)
        }
    }
}

/// Which window prototype fits use.
#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum FitWindow {
    Train,
    TrainPlusValidation,
}

/// Fits one global model per nonempty live cluster over its members'
/// windows. Slot `c` is `None` for empty or dropped clusters.
pub(crate) fn fit_cluster_models(
    dataset: &Dataset,
    members: &[Vec<usize>],
    alive: &[bool],
    config: &CpagmConfig,
    window: FitWindow,
    fit_seed: u64,
) -> Result<Vec<Option<GlobalModel>>> {
    let fitted = par::map_indexed(members.len(), |c| -> Result<Option<GlobalModel>> {
        if !alive[c] || members[c].is_empty() {
            return Ok(None);
        }
        let windows: Vec<&[f64]> = members[c]
            .iter()
            .map(|&i| {
                let (s, sp) = dataset.get(i);
                let range = match window {
                    FitWindow::Train => sp.train,
                    FitWindow::TrainPlusValidation => sp.fit_range(),
                };
                &s.values[range.as_slice_range()]
            })
            .collect();
        let model = match config.model_kind {
            ModelKind::Linear => fit_global_linear(&windows, config.lag),
            ModelKind::Forest => {
                let cfg = config.forest.clone().with_seed(par::derive_seed(fit_seed, c as u64));
                fit_global_forest(&windows, config.lag, &cfg)
            }
        }
        .map_err(|e| match e {
            Error::InsufficientHistory(msg) => {
                Error::InsufficientHistory(format!("cluster {c}: {msg}"))
            }
            other => other,
        })?;
        Ok(Some(model))
    });
    fitted.into_iter().collect()
}

/// One global model per cluster, fitted to the member training periods.
///
/// Empty clusters are reseeded with the series farthest from its current
/// prototype before fitting, so the returned list always has `k` entries.
pub fn prototype_step(
    dataset: &Dataset,
    partition: &Partition,
    config: &CpagmConfig,
) -> Result<(Vec<Option<GlobalModel>>, Partition)> {
    let mut state = IterationState::fresh(partition.clone(), config.k);
    state.reseed_empty_clusters(None);
    let models = fit_cluster_models(
        dataset,
        &state.members,
        &state.alive,
        config,
        FitWindow::Train,
        config.seed,
    )?;
    Ok((models, state.partition))
}

/// Distance of every series to every available prototype. `None` marks a
/// cluster with no model.
fn distance_matrix(
    dataset: &Dataset,
    prototypes: &[Option<GlobalModel>],
    policy: SplitPolicy,
) -> Result<Vec<Vec<Option<f64>>>> {
    let rows = par::map_indexed(dataset.len(), |i| -> Result<Vec<Option<f64>>> {
        let (series, split) = dataset.get(i);
        prototypes
            .iter()
            .map(|m| {
                m.as_ref()
                    .map(|model| distance_to_model(series, split, model, policy))
                    .transpose()
            })
            .collect()
    });
    rows.into_iter().collect()
}

/// Assigns each series to the nearest prototype, ties toward the lowest
/// cluster index.
pub fn assign_step(
    dataset: &Dataset,
    prototypes: &[Option<GlobalModel>],
    config: &CpagmConfig,
) -> Result<Partition> {
    let matrix = distance_matrix(dataset, prototypes, config.split_policy)?;
    let labels = argmin_labels(&matrix)?;
    Partition::new(labels, prototypes.len())
}

fn argmin_labels(matrix: &[Vec<Option<f64>>]) -> Result<Vec<usize>> {
    matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter_map(|(c, d)| d.map(|d| (c, d)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .map(|(c, _)| c)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("series {i}: no prototype available"))
                })
        })
        .collect()
}

/// The clustering objective: the sum over series of the validation-period
/// forecast error under the series' own cluster prototype.
pub fn objective(
    dataset: &Dataset,
    partition: &Partition,
    prototypes: &[Option<GlobalModel>],
    config: &CpagmConfig,
) -> Result<f64> {
    let terms = par::map_indexed(dataset.len(), |i| -> Result<f64> {
        let (series, split) = dataset.get(i);
        let model = prototypes[partition.labels[i]].as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "series {i} is assigned to cluster {} which has no prototype",
                partition.labels[i]
            ))
        })?;
        distance_to_model(series, split, model, config.split_policy)
    });
    terms.into_iter().try_fold(0.0, |acc, t| Ok(acc + t?))
}

/// Bookkeeping for live clusters and empty-cluster reseeding across
/// iterations.
struct IterationState {
    partition: Partition,
    members: Vec<Vec<usize>>,
    alive: Vec<bool>,
    reseeded_last: Vec<bool>,
    consecutive_failures: Vec<u8>,
}

impl IterationState {
    fn fresh(partition: Partition, k: usize) -> Self {
        let members = partition.members();
        IterationState {
            partition,
            members,
            alive: vec![true; k],
            reseeded_last: vec![false; k],
            consecutive_failures: vec![0; k],
        }
    }

    fn replace_partition(&mut self, partition: Partition) {
        self.members = partition.members();
        self.partition = partition;
    }

    /// Reseeds each empty live cluster with the series farthest from its
    /// currently assigned prototype; a cluster whose reseed fails twice in a
    /// row is dropped and stays empty from then on.
    fn reseed_empty_clusters(&mut self, distances: Option<&[Vec<Option<f64>>]>) {
        for c in 0..self.members.len() {
            if !self.alive[c] {
                continue;
            }
            if !self.members[c].is_empty() {
                self.reseeded_last[c] = false;
                self.consecutive_failures[c] = 0;
                continue;
            }
            if self.reseeded_last[c] {
                self.consecutive_failures[c] += 1;
            }
            if self.consecutive_failures[c] >= 2 {
                self.alive[c] = false;
                self.reseeded_last[c] = false;
                continue;
            }
            let candidate = self
                .partition
                .labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| self.members[l].len() >= 2)
                .max_by(|(i, &li), (j, &lj)| {
                    let di = distances
                        .and_then(|m| m[*i][li])
                        .unwrap_or(0.0);
                    let dj = distances
                        .and_then(|m| m[*j][lj])
                        .unwrap_or(0.0);
                    di.total_cmp(&dj).then_with(|| j.cmp(i)) // prefer the earliest index on ties
                })
                .map(|(i, _)| i);
            if let Some(i) = candidate {
                let old = self.partition.labels[i];
                self.partition.labels[i] = c;
                let pos = self.members[old].iter().position(|&x| x == i).unwrap();
                self.members[old].remove(pos);
                self.members[c].push(i);
                self.reseeded_last[c] = true;
            } else {
                // Nothing can move without emptying another cluster.
                self.alive[c] = false;
            }
        }
    }
}

/// Uniform random assignment conditioned on every cluster being nonempty,
/// by rejection sampling with a constructive fallback.
pub(crate) fn random_partition(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    debug_assert!(n >= k);
    for _ in 0..1000 {
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let mut seen = vec![false; k];
        labels.iter().for_each(|&l| seen[l] = true);
        if seen.iter().all(|&s| s) {
            return labels;
        }
    }
    let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    for c in 0..k {
        labels[order[c]] = c;
    }
    labels
}

struct RunOutcome {
    best_partition: Partition,
    best_members: Vec<Vec<usize>>,
    best_alive: Vec<bool>,
    trace: Vec<f64>,
    converged: Convergence,
    seed: u64,
}

/// The minimum-objective iteration seen so far in one run.
struct BestIteration {
    objective: f64,
    index: usize,
    partition: Partition,
    members: Vec<Vec<usize>>,
    alive: Vec<bool>,
}

fn run_once(dataset: &Dataset, config: &CpagmConfig, seed: u64) -> Result<RunOutcome> {
    let n = dataset.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial = Partition::new(random_partition(n, config.k, &mut rng), config.k)?;
    run_from_initial(dataset, config, initial, seed)
}

/// Runs the alternating fit/reassign loop from a given initial partition.
fn run_from_initial(
    dataset: &Dataset,
    config: &CpagmConfig,
    initial: Partition,
    seed: u64,
) -> Result<RunOutcome> {
    let mut state = IterationState::fresh(initial, config.k);
    let mut trace: Vec<f64> = Vec::new();
    let mut best: Option<BestIteration> = None;

    let finish = |best: BestIteration, trace: Vec<f64>, converged: Convergence| {
        let mut partition = best.partition;
        partition.objective = Some(best.objective);
        RunOutcome {
            best_partition: partition,
            best_members: best.members,
            best_alive: best.alive,
            trace,
            converged,
            seed,
        }
    };

    loop {
        let iteration = trace.len(); // 0-based index of the pass we are about to run
        let models = fit_cluster_models(
            dataset,
            &state.members,
            &state.alive,
            config,
            FitWindow::Train,
            par::derive_seed(seed, iteration as u64),
        )?;
        let matrix = distance_matrix(dataset, &models, config.split_policy)?;
        let j: f64 = state
            .partition
            .labels
            .iter()
            .enumerate()
            .map(|(i, &l)| matrix[i][l].expect("assigned cluster has a model"))
            .sum();
        trace.push(j);
        if best.as_ref().is_none_or(|b| j < b.objective) {
            best = Some(BestIteration {
                objective: j,
                index: trace.len() - 1,
                partition: state.partition.clone(),
                members: state.members.clone(),
                alive: state.alive.clone(),
            });
        }

        let best_index = best.as_ref().map(|b| b.index).unwrap();
        let converged = if trace.len() >= config.max_iter {
            Some(Convergence::MaxIter)
        } else if trace.len() - 1 - best_index >= config.patience {
            Some(Convergence::Patience)
        } else {
            None
        };
        if let Some(converged) = converged {
            return Ok(finish(best.unwrap(), trace, converged));
        }

        let labels = argmin_labels(&matrix)?;
        let next = Partition::new(labels, config.k)?;
        if next == state.partition {
            // A confirming pass would refit the same members and reproduce
            // the same models and objective, so it is not counted: the trace
            // holds one entry per distinct model generation.
            return Ok(finish(best.unwrap(), trace, Convergence::FixedPoint));
        }
        state.replace_partition(next);
        state.reseed_empty_clusters(Some(&matrix));
    }
}

/// Runs the clustering algorithm with random restarts and returns the
/// result attaining the minimum objective, with final prototypes refitted
/// on the training and validation periods of the winning partition.
pub fn run(dataset: &Dataset, config: &CpagmConfig) -> Result<CpagmResult> {
    config.validate(dataset.len())?;
    for (s, sp) in dataset.series().iter().zip(dataset.splits()) {
        if sp.train.len() < config.lag + 1 {
            return Err(Error::InsufficientHistory(format!(
                "series '{}': training period of {} observations cannot fit lag {}",
                s.id,
                sp.train.len(),
                config.lag
            )));
        }
    }

    let outcomes = par::map_indexed(config.restarts, |r| {
        run_once(dataset, config, par::derive_seed(config.seed, r as u64))
    });
    let mut winner: Option<RunOutcome> = None;
    for outcome in outcomes {
        let outcome = outcome?;
        let j = outcome.best_partition.objective.unwrap();
        if winner
            .as_ref()
            .is_none_or(|w| j < w.best_partition.objective.unwrap())
        {
            winner = Some(outcome);
        }
    }
    let outcome = winner.expect("restarts >= 1");

    let prototypes = fit_cluster_models(
        dataset,
        &outcome.best_members,
        &outcome.best_alive,
        config,
        FitWindow::TrainPlusValidation,
        par::derive_seed(outcome.seed, u64::MAX),
    )?;
    let j_opt = outcome.best_partition.objective.unwrap();
    Ok(CpagmResult {
        partition: outcome.best_partition,
        prototypes,
        iterations: outcome.trace.len(),
        j_opt,
        objective_trace: outcome.trace,
        converged: outcome.converged,
        config: config.clone(),
        restart_seed: outcome.seed,
    })
}

/// Per-series test errors plus their average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEvaluation {
    /// One entry per series; `None` marks a series whose scaled error was
    /// undefined (degenerate naive scale) and was excluded from the average.
    pub per_series: Vec<Option<f64>>,
    pub average: f64,
    pub excluded: usize,
}

/// Forecasts each series over its test block with its cluster's final
/// prototype and scores the chosen metric per series and on average.
pub fn evaluate_test(result: &CpagmResult, dataset: &Dataset, metric: Metric) -> Result<TestEvaluation> {
    evaluate_test_window(result, dataset, metric, 0, usize::MAX)
}

/// Like [`evaluate_test`] but scoring only forecast steps
/// `skip..skip+take` of each series' test block (used by two-stage
/// parameter selection).
pub fn evaluate_test_window(
    result: &CpagmResult,
    dataset: &Dataset,
    metric: Metric,
    skip: usize,
    take: usize,
) -> Result<TestEvaluation> {
    evaluate_models_window(
        dataset,
        &result.partition.labels,
        &result.prototypes,
        metric,
        skip,
        take,
    )
}

/// Scores recursive test-block forecasts of each series under the model its
/// label points at. Shared by the clustering result evaluation and the
/// baselines.
pub(crate) fn evaluate_models_window(
    dataset: &Dataset,
    labels: &[usize],
    models: &[Option<GlobalModel>],
    metric: Metric,
    skip: usize,
    take: usize,
) -> Result<TestEvaluation> {
    let scored = par::map_indexed(dataset.len(), |i| -> Result<Option<f64>> {
        let (series, split) = dataset.get(i);
        let h = split.test_horizon;
        if h == 0 {
            return Err(Error::InvalidArgument(format!(
                "series '{}' has no test period",
                series.id
            )));
        }
        let label = labels[i];
        let model = models[label].as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "series '{}' is assigned to empty cluster {label}",
                series.id
            ))
        })?;
        let history = dataset.pre_test(i);
        let predicted = forecast(model, history, h)?;
        let upto = (skip + take.min(h)).min(h);
        if skip >= upto {
            return Err(Error::InvalidArgument(format!(
                "evaluation window {skip}.. is empty for horizon {h}"
            )));
        }
        let actual = &dataset.test_block(i)[skip..upto];
        let history_series = TimeSeries::new(
            series.id.clone(),
            history.to_vec(),
            series.seasonal_period,
        )?;
        match metric.score(actual, &predicted[skip..upto], &history_series) {
            Ok(v) => Ok(Some(v)),
            Err(Error::DegenerateScale(_)) => Ok(None),
            Err(e) => Err(e),
        }
    });
    collect_evaluation(scored)
}

/// Folds per-series optional scores into a [`TestEvaluation`].
pub(crate) fn collect_evaluation(scored: Vec<Result<Option<f64>>>) -> Result<TestEvaluation> {
    let per_series = scored.into_iter().collect::<Result<Vec<_>>>()?;
    let kept: Vec<f64> = per_series.iter().filter_map(|v| *v).collect();
    if kept.is_empty() {
        return Err(Error::DegenerateScale(
            "every series had an undefined score".into(),
        ));
    }
    Ok(TestEvaluation {
        average: kept.iter().sum::<f64>() / kept.len() as f64,
        excluded: per_series.len() - kept.len(),
        per_series,
    })
}
