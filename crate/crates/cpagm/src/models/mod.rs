//! Forecasting models: lag embedding, pooled global fits (linear and tree
//! ensemble), per-series AR fits with AICc order selection, and recursive
//! multi-step forecasting.
//!
//! A *global* model is one regression fitted to the stacked lag-embedded
//! rows of many series; pooling is what lets short series borrow strength
//! from the rest of their cluster.

mod forest;
mod linear;

pub use forest::{fit_global_forest, ForestConfig, TreeNode};
pub use linear::{fit_global_linear, fit_local_ar};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row counts recorded while pooling the design matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub pooled_rows: usize,
    pub per_series_rows: Vec<usize>,
}

/// A fitted global model serving as a cluster prototype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GlobalModel {
    Linear {
        lag_order: usize,
        intercept: f64,
        /// `coefficients[i]` weights the observation `i + 1` steps back.
        coefficients: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fit_meta: Option<FitMetadata>,
    },
    Forest {
        lag_order: usize,
        config: ForestConfig,
        trees: Vec<TreeNode>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fit_meta: Option<FitMetadata>,
    },
}

impl GlobalModel {
    /// Hand-built affine autoregression, mainly for tests and serialization
    /// round-trips.
    pub fn linear(intercept: f64, coefficients: Vec<f64>) -> Self {
        GlobalModel::Linear {
            lag_order: coefficients.len(),
            intercept,
            coefficients,
            fit_meta: None,
        }
    }

    pub fn fit_meta(&self) -> Option<&FitMetadata> {
        match self {
            GlobalModel::Linear { fit_meta, .. } | GlobalModel::Forest { fit_meta, .. } => {
                fit_meta.as_ref()
            }
        }
    }
}

/// A per-series autoregression selected by AICc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalModel {
    pub ar_order: usize,
    pub intercept: f64,
    /// `coefficients[i]` weights the observation `i + 1` steps back.
    pub coefficients: Vec<f64>,
    pub aicc: f64,
}

/// Anything that can produce a one-step-ahead prediction from its most
/// recent `lag_order` observations.
pub trait Forecaster {
    fn lag_order(&self) -> usize;

    /// One-step prediction from `window`, the last `lag_order` observations
    /// in chronological order (oldest first).
    fn predict_window(&self, window: &[f64]) -> f64;
}

fn predict_affine(intercept: f64, coefficients: &[f64], window: &[f64]) -> f64 {
    debug_assert_eq!(window.len(), coefficients.len());
    let l = coefficients.len();
    let mut y = intercept;
    for (m, c) in coefficients.iter().enumerate() {
        // Coefficient for lag m+1 meets the value m+1 steps from the window end.
        y += c * window[l - 1 - m];
    }
    y
}

impl Forecaster for GlobalModel {
    fn lag_order(&self) -> usize {
        match self {
            GlobalModel::Linear { lag_order, .. } | GlobalModel::Forest { lag_order, .. } => {
                *lag_order
            }
        }
    }

    fn predict_window(&self, window: &[f64]) -> f64 {
        match self {
            GlobalModel::Linear {
                intercept,
                coefficients,
                ..
            } => predict_affine(*intercept, coefficients, window),
            GlobalModel::Forest { trees, .. } => {
                let sum: f64 = trees.iter().map(|t| t.predict(window)).sum();
                sum / trees.len() as f64
            }
        }
    }
}

impl Forecaster for LocalModel {
    fn lag_order(&self) -> usize {
        self.ar_order
    }

    fn predict_window(&self, window: &[f64]) -> f64 {
        predict_affine(self.intercept, &self.coefficients, window)
    }
}

/// Lag-embeds a window into supervised rows.
///
/// Row `t` holds `(x_{t-l}, ..., x_{t-1})` (most recent last) with target
/// `x_t`, for `t = l+1 ..= len`; the row count is `len - l`.
pub fn lag_embed(window: &[f64], lag: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if lag == 0 {
        return Err(Error::InvalidArgument("lag must be >= 1".into()));
    }
    if window.len() < lag + 1 {
        return Err(Error::InsufficientHistory(format!(
            "window of length {} cannot be embedded at lag {lag}",
            window.len()
        )));
    }
    let rows = (lag..window.len())
        .map(|t| window[t - lag..t].to_vec())
        .collect();
    let targets = window[lag..].to_vec();
    Ok((rows, targets))
}

/// Pooled design matrix: rows stacked in input order (window order, then
/// time order) so fits are reproducible bit-for-bit.
pub(crate) struct PooledDesign {
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub per_series_rows: Vec<usize>,
}

impl PooledDesign {
    /// Windows shorter than `lag + 1` contribute zero rows; pooling fails
    /// only when every window is too short.
    pub fn pool(windows: &[&[f64]], lag: usize) -> Result<Self> {
        if lag == 0 {
            return Err(Error::InvalidArgument("lag must be >= 1".into()));
        }
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        let mut per_series_rows = Vec::with_capacity(windows.len());
        for w in windows {
            if w.len() < lag + 1 {
                per_series_rows.push(0);
                continue;
            }
            let (mut r, mut t) = lag_embed(w, lag)?;
            per_series_rows.push(r.len());
            rows.append(&mut r);
            targets.append(&mut t);
        }
        if rows.is_empty() {
            return Err(Error::InsufficientHistory(format!(
                "no window long enough to embed at lag {lag}"
            )));
        }
        Ok(PooledDesign {
            rows,
            targets,
            per_series_rows,
        })
    }

    pub fn metadata(&self) -> FitMetadata {
        FitMetadata {
            pooled_rows: self.rows.len(),
            per_series_rows: self.per_series_rows.clone(),
        }
    }
}

/// Iterated one-step-ahead forecasting: each prediction is appended to the
/// working history and fed back as a lag input for the next step.
pub fn forecast(model: &impl Forecaster, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let lag = model.lag_order();
    if history.len() < lag {
        return Err(Error::InsufficientHistory(format!(
            "history of length {} is shorter than lag order {lag}",
            history.len()
        )));
    }
    let mut window: Vec<f64> = history[history.len() - lag..].to_vec();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let next = model.predict_window(&window);
        out.push(next);
        if lag > 0 {
            window.remove(0);
            window.push(next);
        }
    }
    Ok(out)
}
