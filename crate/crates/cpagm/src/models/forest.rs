//! Bagged regression trees over the pooled lag-embedded design matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::{GlobalModel, PooledDesign};
use crate::par;

/// Tree-ensemble hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` uses `ceil(lag / 3)`.
    pub mtry: Option<usize>,
    /// Seed for bootstrap sampling and per-node feature selection. Fits are
    /// deterministic given the seed, independent of thread count.
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 12,
            // Recursive multi-step forecasting compounds per-tree variance,
            // so leaves stay fairly large.
            min_leaf: 15,
            mtry: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn mtry_for(&self, lag: usize) -> usize {
        self.mtry.unwrap_or(lag.div_ceil(3)).clamp(1, lag)
    }
}

/// A regression tree stored as nested split/leaf records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
    },
}

impl TreeNode {
    pub fn predict(&self, window: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if window[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

/// Fits a bagged ensemble of regression trees to the pooled design matrix.
///
/// Degenerate designs (constant targets, a single row) simply produce
/// constant-leaf trees; there is no error path beyond an empty pool.
pub fn fit_global_forest(windows: &[&[f64]], lag: usize, config: &ForestConfig) -> Result<GlobalModel> {
    let design = PooledDesign::pool(windows, lag)?;
    let mtry = config.mtry_for(lag);
    let trees = par::map_indexed(config.n_trees.max(1), |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(par::derive_seed(config.seed, t as u64));
        let n = design.rows.len();
        let mut sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        grow(&design, &mut sample, 0, mtry, config, &mut rng)
    });
    Ok(GlobalModel::Forest {
        lag_order: lag,
        config: config.clone(),
        trees,
        fit_meta: Some(design.metadata()),
    })
}

fn leaf(design: &PooledDesign, idx: &[usize]) -> TreeNode {
    let sum: f64 = idx.iter().map(|&i| design.targets[i]).sum();
    TreeNode::Leaf {
        value: sum / idx.len() as f64,
    }
}

fn grow(
    design: &PooledDesign,
    idx: &mut [usize],
    depth: usize,
    mtry: usize,
    config: &ForestConfig,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    let n = idx.len();
    if depth >= config.max_depth || n < 2 * config.min_leaf {
        return leaf(design, idx);
    }
    let first = design.targets[idx[0]];
    if idx.iter().all(|&i| design.targets[i] == first) {
        return leaf(design, idx);
    }

    let n_features = design.rows[0].len();
    let features = sample_features(n_features, mtry, rng);

    // Best split over the sampled features: maximize sum_L^2/n_L + sum_R^2/n_R,
    // which minimizes the summed squared error of the two children.
    let mut best: Option<(f64, usize, f64)> = None; // (score, feature, threshold)
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for &f in &features {
        order.clear();
        order.extend_from_slice(idx);
        order.sort_unstable_by(|&a, &b| {
            design.rows[a][f]
                .total_cmp(&design.rows[b][f])
                .then(a.cmp(&b))
        });
        let total: f64 = order.iter().map(|&i| design.targets[i]).sum();
        let mut left_sum = 0.0;
        for split_at in 1..n {
            left_sum += design.targets[order[split_at - 1]];
            if split_at < config.min_leaf || n - split_at < config.min_leaf {
                continue;
            }
            let lo = design.rows[order[split_at - 1]][f];
            let hi = design.rows[order[split_at]][f];
            if lo == hi {
                continue;
            }
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / split_at as f64
                + right_sum * right_sum / (n - split_at) as f64;
            if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
                best = Some((score, f, 0.5 * (lo + hi)));
            }
        }
    }

    let Some((_, feature, threshold)) = best else {
        return leaf(design, idx);
    };
    let mid = partition_in_place(design, idx, feature, threshold);
    let (left_idx, right_idx) = idx.split_at_mut(mid);
    let left = grow(design, left_idx, depth + 1, mtry, config, rng);
    let right = grow(design, right_idx, depth + 1, mtry, config, rng);
    TreeNode::Split {
        feature,
        threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

fn partition_in_place(design: &PooledDesign, idx: &mut [usize], feature: usize, threshold: f64) -> usize {
    let mut mid = 0;
    for i in 0..idx.len() {
        if design.rows[idx[i]][feature] <= threshold {
            idx.swap(i, mid);
            mid += 1;
        }
    }
    mid
}

fn sample_features(n_features: usize, mtry: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if mtry >= n_features {
        return (0..n_features).collect();
    }
    // Partial Fisher-Yates over a scratch index vector.
    let mut pool: Vec<usize> = (0..n_features).collect();
    for i in 0..mtry {
        let j = rng.random_range(i..n_features);
        pool.swap(i, j);
    }
    pool.truncate(mtry);
    pool
}
