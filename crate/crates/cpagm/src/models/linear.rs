//! Least-squares fitting for pooled global models and per-series AR models.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::{GlobalModel, LocalModel, PooledDesign};

/// Solves `min ||y - (b0 + X b)||^2` over the given design rows.
///
/// The normal equations are solved by Cholesky; a rank-deficient or
/// ill-conditioned Gram matrix falls back to ridge with penalty
/// `1e-8 * trace(X'X) / cols`, escalating the penalty if needed, so constant
/// or collinear designs fit without error. Accumulation order is fixed, so
/// identical inputs give bit-identical coefficients.
///
/// Returns `(intercept, column_coefficients)` where column coefficients are
/// in design-column order.
pub(crate) fn solve_with_intercept(rows: &[Vec<f64>], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    debug_assert_eq!(rows.len(), targets.len());
    let n_cols = rows.first().map_or(0, |r| r.len()) + 1; // intercept column first
    let mut gram = DMatrix::<f64>::zeros(n_cols, n_cols);
    let mut xty = DVector::<f64>::zeros(n_cols);
    let mut row_buf = vec![0.0; n_cols];
    for (row, &y) in rows.iter().zip(targets) {
        row_buf[0] = 1.0;
        row_buf[1..].copy_from_slice(row);
        for i in 0..n_cols {
            for j in i..n_cols {
                gram[(i, j)] += row_buf[i] * row_buf[j];
            }
            xty[i] += row_buf[i] * y;
        }
    }
    for i in 0..n_cols {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }

    if let Some(beta) = try_solve(&gram, &xty) {
        return Ok(split_intercept(beta));
    }
    let mut ridge = 1e-8 * gram.trace() / n_cols as f64;
    if ridge <= 0.0 {
        ridge = 1e-12;
    }
    for _ in 0..4 {
        let mut regularized = gram.clone();
        for i in 0..n_cols {
            regularized[(i, i)] += ridge;
        }
        if let Some(beta) = try_solve(&regularized, &xty) {
            return Ok(split_intercept(beta));
        }
        ridge *= 1e3;
    }
    Err(Error::Numerical(
        "least-squares system unsolvable even with ridge regularization".into(),
    ))
}

fn try_solve(gram: &DMatrix<f64>, xty: &DVector<f64>) -> Option<DVector<f64>> {
    let beta = Cholesky::new(gram.clone())?.solve(xty);
    beta.iter().all(|v| v.is_finite()).then_some(beta)
}

fn split_intercept(beta: DVector<f64>) -> (f64, Vec<f64>) {
    (beta[0], beta.as_slice()[1..].to_vec())
}

/// Fits one affine autoregression of order `lag` to the pooled lag-embedded
/// rows of `windows` by least squares.
///
/// Stacking the per-window matrices is what pools the data; a single window
/// reduces to ordinary AR(`lag`) least squares on that window.
pub fn fit_global_linear(windows: &[&[f64]], lag: usize) -> Result<GlobalModel> {
    let design = PooledDesign::pool(windows, lag)?;
    let (intercept, col_coefs) = solve_with_intercept(&design.rows, &design.targets)?;
    // Design columns are oldest-first; model coefficients are indexed by lag.
    let coefficients: Vec<f64> = col_coefs.into_iter().rev().collect();
    Ok(GlobalModel::Linear {
        lag_order: lag,
        intercept,
        coefficients,
        fit_meta: Some(design.metadata()),
    })
}

/// Fits AR(p) by conditional least squares for `p = 0..=p_max` and keeps the
/// order minimizing AICc, with ties broken toward smaller `p`.
///
/// AICc is `n ln(RSS/n) + 2k + 2k(k+1)/(n-k-1)` with `k = p + 2` (the
/// coefficients, the intercept and the innovation variance) and `n` the
/// usable rows at that order. Candidates whose correction term is undefined
/// (`n - k - 1 <= 0`) are skipped.
pub fn fit_local_ar(values: &[f64], p_max: usize) -> Result<LocalModel> {
    if values.len() < p_max + 2 {
        return Err(Error::InsufficientHistory(format!(
            "series of length {} is too short for p_max {p_max}",
            values.len()
        )));
    }
    let mut best: Option<LocalModel> = None;
    for p in 0..=p_max {
        let n = values.len() - p;
        let k = p + 2;
        if n <= k + 1 {
            continue;
        }
        let (rows, targets): (Vec<Vec<f64>>, Vec<f64>) = if p == 0 {
            (vec![vec![]; values.len()], values.to_vec())
        } else {
            crate::models::lag_embed(values, p)?
        };
        let (intercept, col_coefs) = solve_with_intercept(&rows, &targets)?;
        let rss: f64 = rows
            .iter()
            .zip(&targets)
            .map(|(row, &y)| {
                let fitted = intercept + row.iter().zip(&col_coefs).map(|(x, c)| x * c).sum::<f64>();
                (y - fitted).powi(2)
            })
            .sum();
        let nf = n as f64;
        let kf = k as f64;
        // Exactly-interpolating fits at different orders must tie on the
        // log term so the parsimony penalty decides; floor the residual
        // variance at the squared rounding noise of the targets.
        let rms = (targets.iter().map(|y| y * y).sum::<f64>() / nf).sqrt();
        let floor = (f64::EPSILON * rms).powi(2).max(f64::MIN_POSITIVE);
        let mean_sq = (rss / nf).max(floor);
        let aicc = nf * mean_sq.ln() + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0);
        if best.as_ref().is_none_or(|b| aicc < b.aicc) {
            best = Some(LocalModel {
                ar_order: p,
                intercept,
                coefficients: col_coefs.into_iter().rev().collect(),
                aicc,
            });
        }
    }
    best.ok_or_else(|| {
        Error::InsufficientHistory(format!(
            "no AR order in 0..={p_max} has a defined AICc for {} observations",
            values.len()
        ))
    })
}
