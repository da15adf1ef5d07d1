//! Comparison methods sharing the clustering evaluation pipeline:
//!
//! * **LM** — one local AR model per series (order selected by AICc), with
//!   the clustering side obtained by K-means on zero-padded coefficient
//!   vectors.
//! * **GMAP** — global models fitted to a uniformly random partition,
//!   averaged over Monte Carlo repetitions.
//! * **GMFBC** — K-means on per-series summary features, then one global
//!   model per feature cluster.

mod features;
mod kmeans;

pub use features::{feature_vector, standardize};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{
    collect_evaluation, evaluate_models_window, fit_cluster_models, random_partition, CpagmConfig,
    FitWindow, TestEvaluation,
};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::models::{fit_global_forest, fit_local_ar, forecast};
use crate::par;
use crate::types::{Dataset, Partition, TimeSeries};

/// Outcome of the local-models baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmOutcome {
    /// Per-series test error; `None` marks a series whose fit or scaled
    /// error failed and was excluded from the average.
    pub evaluation: TestEvaluation,
    /// K-means partition of the zero-padded AR coefficient vectors.
    pub partition: Partition,
}

/// Fits a local AR model to each series (on its training plus validation
/// periods), forecasts the test block recursively and scores `metric`.
///
/// The clustering comparison describes each series by its estimated AR
/// coefficients, zero-padded to `p_max`, and runs K-means with `k` groups
/// on those vectors.
pub fn lm_baseline(
    dataset: &Dataset,
    p_max: usize,
    metric: Metric,
    k: usize,
    seed: u64,
) -> Result<LmOutcome> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let fitted = par::map_indexed(dataset.len(), |i| -> Result<(Option<f64>, Vec<f64>)> {
        let (series, split) = dataset.get(i);
        let window = dataset.pre_test(i);
        let model = match fit_local_ar(window, p_max) {
            Ok(m) => m,
            // Too-short series are recorded as failed, not fatal.
            Err(Error::InsufficientHistory(_)) => return Ok((None, vec![0.0; p_max])),
            Err(e) => return Err(e),
        };
        let mut padded = model.coefficients.clone();
        padded.resize(p_max, 0.0);
        let predicted = forecast(&model, window, split.test_horizon)?;
        let history = TimeSeries::new(series.id.clone(), window.to_vec(), series.seasonal_period)?;
        let score = match metric.score(dataset.test_block(i), &predicted, &history) {
            Ok(v) => Some(v),
            Err(Error::DegenerateScale(_)) => None,
            Err(e) => return Err(e),
        };
        Ok((score, padded))
    });
    let mut scores = Vec::with_capacity(dataset.len());
    let mut coefficient_vectors = Vec::with_capacity(dataset.len());
    for item in fitted {
        let (score, coefs) = item?;
        scores.push(Ok(score));
        coefficient_vectors.push(coefs);
    }
    let evaluation = collect_evaluation(scores)?;
    let clustering = kmeans::kmeans(&coefficient_vectors, k, 10, 100, seed)?;
    Ok(LmOutcome {
        evaluation,
        partition: Partition::new(clustering.labels, k)?,
    })
}

/// Local tree-ensemble errors: one forest per series (pooling of one),
/// recursive test forecasts, per-series metric. The nonlinear analogue of
/// the forecasting half of [`lm_baseline`].
pub fn lm_forest_errors(
    dataset: &Dataset,
    lag: usize,
    forest: &crate::models::ForestConfig,
    metric: Metric,
    seed: u64,
) -> Result<TestEvaluation> {
    let scored = par::map_indexed(dataset.len(), |i| -> Result<Option<f64>> {
        let (series, split) = dataset.get(i);
        let window = dataset.pre_test(i);
        let cfg = forest.clone().with_seed(par::derive_seed(seed, i as u64));
        let model = match fit_global_forest(&[window], lag, &cfg) {
            Ok(m) => m,
            Err(Error::InsufficientHistory(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let predicted = forecast(&model, window, split.test_horizon)?;
        let history = TimeSeries::new(series.id.clone(), window.to_vec(), series.seasonal_period)?;
        match metric.score(dataset.test_block(i), &predicted, &history) {
            Ok(v) => Ok(Some(v)),
            Err(Error::DegenerateScale(_)) => Ok(None),
            Err(e) => Err(e),
        }
    });
    collect_evaluation(scored)
}

/// Global models on uniformly random partitions, Monte Carlo averaged.
///
/// Each repetition draws a random nonempty `k`-partition, fits one global
/// model per cluster on the training and validation periods, and scores the
/// test block; the mean over repetitions is returned.
pub fn gmap_baseline(
    dataset: &Dataset,
    config: &CpagmConfig,
    metric: Metric,
    mc_reps: usize,
) -> Result<f64> {
    if config.k > dataset.len() {
        return Err(Error::InvalidArgument(format!(
            "k={} exceeds n={}",
            config.k,
            dataset.len()
        )));
    }
    if mc_reps == 0 {
        return Err(Error::InvalidArgument("mc_reps must be >= 1".into()));
    }
    let reps = par::map_indexed(mc_reps, |rep| -> Result<f64> {
        let rep_seed = par::derive_seed(config.seed, rep as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
        let labels = random_partition(dataset.len(), config.k, &mut rng);
        let partition = Partition::new(labels, config.k)?;
        let models = fit_cluster_models(
            dataset,
            &partition.members(),
            &vec![true; config.k],
            config,
            FitWindow::TrainPlusValidation,
            rep_seed,
        )?;
        Ok(
            evaluate_models_window(dataset, &partition.labels, &models, metric, 0, usize::MAX)?
                .average,
        )
    });
    let mut total = 0.0;
    for r in &reps {
        total += *r.as_ref().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    Ok(total / mc_reps as f64)
}

/// Feature-based clustering followed by per-cluster global models.
///
/// Features are computed on each series' pre-test observations with
/// `lag`-many autocorrelation terms, standardized over the dataset, and
/// clustered by K-means (k-means++ init, 10 restarts). One global model per
/// feature cluster is then fitted on training plus validation and scored on
/// the test block.
pub fn gmfbc_baseline(
    dataset: &Dataset,
    config: &CpagmConfig,
    metric: Metric,
) -> Result<(Partition, TestEvaluation)> {
    let partition = gmfbc_partition(dataset, config)?;
    let models = fit_cluster_models(
        dataset,
        &partition.members(),
        &vec![true; config.k],
        config,
        FitWindow::TrainPlusValidation,
        par::derive_seed(config.seed, 1),
    )?;
    let evaluation =
        evaluate_models_window(dataset, &partition.labels, &models, metric, 0, usize::MAX)?;
    Ok((partition, evaluation))
}

/// The clustering half of [`gmfbc_baseline`].
pub fn gmfbc_partition(dataset: &Dataset, config: &CpagmConfig) -> Result<Partition> {
    let vectors = par::map_indexed(dataset.len(), |i| feature_vector(dataset.pre_test(i), config.lag))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let standardized = standardize(vectors)?;
    let clustering = kmeans::kmeans(&standardized, config.k, 10, 100, config.seed)?;
    Partition::new(clustering.labels, config.k)
}
