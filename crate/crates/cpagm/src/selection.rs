//! Grid search over `(K, l)`: every cell runs the clustering algorithm and
//! is ranked by its average test-set prediction error, which covers the
//! single-global-model endpoint (`K = 1`) and the local endpoint (`K = n`).

use serde::{Deserialize, Serialize};

use crate::cluster::{evaluate_test_window, run, CpagmConfig, CpagmResult};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::par;
use crate::simulation::SplitPolicy;
use crate::types::Dataset;

/// Grid of candidate `(K, l)` pairs plus the per-cell run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub k_values: Vec<usize>,
    pub l_values: Vec<usize>,
    pub metric: Metric,
    /// Run configuration template; its `k` and `lag` are overridden per
    /// cell, and each cell derives its own seed from `template.seed` and
    /// the pair itself (so adding cells never changes other cells).
    pub template: CpagmConfig,
    /// Two-stage mode: select on the first `h1` test observations and
    /// report the winner's error on the remaining ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_horizon: Option<usize>,
}

/// One evaluated grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub k: usize,
    pub l: usize,
    pub metric: Metric,
    /// Average selection error; `None` when the cell failed.
    pub avg_error: Option<f64>,
    pub status: String,
    pub seed: u64,
}

/// Result of a grid search: the full ranked table plus the winning cell's
/// clustering result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    /// Successful cells ascending by error (ties toward smaller `K`, then
    /// smaller `l`), followed by failed cells.
    pub table: Vec<GridCell>,
    pub best_k: usize,
    pub best_l: usize,
    pub best_error: f64,
    pub best: CpagmResult,
    /// Two-stage mode only: the winner's error on the held-back evaluation
    /// part of the test block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation_error: Option<f64>,
}

fn cell_seed(template_seed: u64, k: usize, l: usize) -> u64 {
    par::derive_seed2(template_seed, k as u64, l as u64)
}

fn cell_config(grid: &GridSpec, k: usize, l: usize) -> CpagmConfig {
    CpagmConfig {
        k,
        lag: l,
        seed: cell_seed(grid.template.seed, k, l),
        ..grid.template.clone()
    }
}

fn cell_dataset(dataset: &Dataset, grid: &GridSpec, l: usize) -> Result<Dataset> {
    // In-sample cells score reassignment on one-step fitted errors, so the
    // validation window must track each cell's lag.
    match grid.template.split_policy {
        SplitPolicy::InSample => dataset.with_in_sample_validation(l),
        SplitPolicy::OutOfSample => Ok(dataset.clone()),
    }
}

fn run_cell(dataset: &Dataset, grid: &GridSpec, k: usize, l: usize) -> Result<(CpagmResult, f64)> {
    let data = cell_dataset(dataset, grid, l)?;
    let config = cell_config(grid, k, l);
    let result = run(&data, &config)?;
    let selection_take = grid.selection_horizon.unwrap_or(usize::MAX);
    let evaluation = evaluate_test_window(&result, &data, grid.metric, 0, selection_take)?;
    Ok((result, evaluation.average))
}

/// Runs every feasible cell and returns the ranked table together with the
/// minimum-error cell's full result. Failed cells carry their reason and
/// are excluded from the ranking; the search errors only if every cell
/// fails.
pub fn grid_search(dataset: &Dataset, grid: &GridSpec) -> Result<GridSearchOutcome> {
    if grid.k_values.is_empty() || grid.l_values.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    if let Some(h1) = grid.selection_horizon {
        let uniform = dataset
            .splits()
            .iter()
            .all(|sp| sp.test_horizon == dataset.splits()[0].test_horizon);
        if !uniform || h1 == 0 || h1 >= dataset.splits()[0].test_horizon {
            return Err(Error::InvalidArgument(
                "two-stage selection needs a uniform test horizon strictly larger than the \
                 selection horizon"
                    .into(),
            ));
        }
    }

    let cells: Vec<(usize, usize)> = grid
        .k_values
        .iter()
        .flat_map(|&k| grid.l_values.iter().map(move |&l| (k, l)))
        .collect();
    let evaluated = par::map_indexed(cells.len(), |i| {
        let (k, l) = cells[i];
        // Results are re-materialized for the winner only; keeping every
        // cell's models alive would be wasteful for forest grids.
        run_cell(dataset, grid, k, l).map(|(_, err)| err)
    });

    let mut table: Vec<GridCell> = cells
        .iter()
        .zip(evaluated)
        .map(|(&(k, l), outcome)| match outcome {
            Ok(err) => GridCell {
                k,
                l,
                metric: grid.metric,
                avg_error: Some(err),
                status: "ok".into(),
                seed: cell_seed(grid.template.seed, k, l),
            },
            Err(e) => GridCell {
                k,
                l,
                metric: grid.metric,
                avg_error: None,
                status: format!("failed: {e}"),
                seed: cell_seed(grid.template.seed, k, l),
            },
        })
        .collect();
    table.sort_by(|a, b| match (a.avg_error, b.avg_error) {
        (Some(x), Some(y)) => x.total_cmp(&y).then(a.k.cmp(&b.k)).then(a.l.cmp(&b.l)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.k.cmp(&b.k).then(a.l.cmp(&b.l)),
    });

    let winner = table
        .iter()
        .find(|c| c.avg_error.is_some())
        .ok_or_else(|| Error::InvalidArgument("every grid cell failed".into()))?;
    let (best_k, best_l) = (winner.k, winner.l);
    let best_error = winner.avg_error.unwrap();

    // Deterministic rerun of the winning cell to materialize its result.
    let (best, _) = run_cell(dataset, grid, best_k, best_l)?;
    let evaluation_error = match grid.selection_horizon {
        None => None,
        Some(h1) => {
            let data = cell_dataset(dataset, grid, best_l)?;
            Some(evaluate_test_window(&best, &data, grid.metric, h1, usize::MAX)?.average)
        }
    };
    Ok(GridSearchOutcome {
        table,
        best_k,
        best_l,
        best_error,
        best,
        evaluation_error,
    })
}
