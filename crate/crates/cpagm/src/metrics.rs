//! Scalar forecast-accuracy metrics and partition-agreement scoring.
//!
//! All computations run in double precision. Conventions that the metric
//! definitions leave open are pinned here:
//!
//! * `smape` terms with a zero denominator (`|a| + |f| = 0`) contribute 0,
//!   so batch evaluation stays total on datasets containing runs of zeros.
//! * `mase` with a zero naive scale is an explicit [`Error::DegenerateScale`]
//!   rather than infinity, which would silently corrupt averages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::TimeSeries;

/// Forecast-accuracy metric selector for test-set evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mae,
    Mase,
    Smape,
}

impl Metric {
    /// Scores one series' forecast. `history` is the pre-forecast
    /// observations, used only by the scaled-error metric.
    pub fn score(&self, actual: &[f64], predicted: &[f64], history: &TimeSeries) -> Result<f64> {
        match self {
            Metric::Mae => mae(actual, predicted),
            Metric::Smape => smape(actual, predicted),
            Metric::Mase => mase(actual, predicted, history),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Mae => "mae",
            Metric::Mase => "mase",
            Metric::Smape => "smape",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mae" => Ok(Metric::Mae),
            "mase" => Ok(Metric::Mase),
            "smape" => Ok(Metric::Smape),
            other => Err(Error::InvalidArgument(format!("unknown metric '{other}'"))),
        }
    }
}

fn check_pair(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.is_empty() {
        return Err(Error::InvalidArgument("empty input".into()));
    }
    if actual.len() != predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} actual vs {} predicted",
            actual.len(),
            predicted.len()
        )));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, f)| (a - f).abs())
        .sum();
    Ok(sum / actual.len() as f64)
}

/// Symmetric mean absolute percentage error, in `[0, 200]`.
pub fn smape(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, f)| {
            let denom = a.abs() + f.abs();
            if denom == 0.0 {
                0.0
            } else {
                (a - f).abs() / denom
            }
        })
        .sum();
    Ok(200.0 * sum / actual.len() as f64)
}

/// Mean absolute scaled error: MAE of the forecast divided by the in-history
/// seasonal-naive MAE.
///
/// The naive scale is `(1/(L-m)) * sum_{t=m+1..L} |x_t - x_{t-m}|` computed
/// over `history` (the pre-test observations) with `m` the series' seasonal
/// period. A constant (or exactly periodic) history makes that scale zero
/// and yields [`Error::DegenerateScale`].
pub fn mase(actual: &[f64], predicted: &[f64], history: &TimeSeries) -> Result<f64> {
    check_pair(actual, predicted)?;
    let scale = naive_mae(&history.values, history.seasonal_period)?;
    if scale == 0.0 {
        return Err(Error::DegenerateScale(format!(
            "series '{}': naive in-history error is zero",
            history.id
        )));
    }
    Ok(mae(actual, predicted)? / scale)
}

fn naive_mae(values: &[f64], m: usize) -> Result<f64> {
    if values.len() <= m {
        return Err(Error::InsufficientHistory(format!(
            "history of length {} cannot support seasonal period {m}",
            values.len()
        )));
    }
    let n = values.len() - m;
    let sum: f64 = (m..values.len())
        .map(|t| (values[t] - values[t - m]).abs())
        .sum();
    Ok(sum / n as f64)
}

/// Adjusted Rand index between two labelings, computed from the contingency
/// table. Returns 1 for identical partitions up to relabeling, ~0 for
/// chance-level agreement, and can dip below 0 for worse-than-chance.
pub fn ari(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            labels_a.len(),
            labels_b.len()
        )));
    }
    if labels_a.len() < 2 {
        return Err(Error::InvalidArgument(
            "adjusted Rand index needs at least 2 items".into(),
        ));
    }
    let ka = labels_a.iter().max().map_or(0, |&m| m + 1);
    let kb = labels_b.iter().max().map_or(0, |&m| m + 1);
    let mut table = vec![0u64; ka * kb];
    let mut row = vec![0u64; ka];
    let mut col = vec![0u64; kb];
    for (&a, &b) in labels_a.iter().zip(labels_b) {
        table[a * kb + b] += 1;
        row[a] += 1;
        col[b] += 1;
    }
    let choose2 = |n: u64| (n * n.saturating_sub(1)) as f64 / 2.0;
    let sum_cells: f64 = table.iter().map(|&n| choose2(n)).sum();
    let sum_rows: f64 = row.iter().map(|&n| choose2(n)).sum();
    let sum_cols: f64 = col.iter().map(|&n| choose2(n)).sum();
    let total = choose2(labels_a.len() as u64);

    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    if max_index == expected {
        // Both partitions induce identical co-membership (e.g. both trivial).
        return Ok(1.0);
    }
    Ok((sum_cells - expected) / (max_index - expected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(values: &[f64], m: usize) -> TimeSeries {
        TimeSeries::new("h", values.to_vec(), m).unwrap()
    }

    #[test]
    fn mae_known_values() {
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mae(&[5.0], &[2.0]).unwrap(), 3.0);
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mae(&[], &[]).is_err());
    }

    #[test]
    fn smape_known_values() {
        assert_eq!(smape(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(smape(&[1.0], &[3.0]).unwrap(), 100.0);
        assert_eq!(smape(&[0.0], &[0.0]).unwrap(), 0.0);
        assert!(smape(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mase_known_values() {
        let h = series(&[1.0, 2.0, 3.0, 4.0], 1);
        assert_eq!(mase(&[5.0], &[5.0], &h).unwrap(), 0.0);
        assert_eq!(mase(&[5.0], &[3.0], &h).unwrap(), 2.0);
        let constant = series(&[1.0, 1.0, 1.0], 1);
        assert!(matches!(
            mase(&[1.0], &[1.0], &constant),
            Err(Error::DegenerateScale(_))
        ));
    }

    #[test]
    fn mase_seasonal_scale() {
        // m=2: naive diffs |3-1|, |4-2| -> scale 2.
        let h = series(&[1.0, 2.0, 3.0, 4.0], 2);
        assert_eq!(mase(&[6.0], &[2.0], &h).unwrap(), 2.0);
        // Seasonal period >= history length is rejected.
        assert!(mase(&[1.0], &[1.0], &series(&[1.0, 2.0], 2)).is_err());
    }

    #[test]
    fn ari_known_values() {
        assert_eq!(ari(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 0, 1, 1], &[0, 0, 0, 0]).unwrap(), 0.0);
        assert!((ari(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap() - (-0.5)).abs() < 1e-12);
        assert!(ari(&[0, 1], &[0]).is_err());
        assert!(ari(&[0], &[0]).is_err());
    }

    #[test]
    fn ari_trivial_partitions_agree() {
        assert_eq!(ari(&[0, 0, 0], &[1, 1, 1]).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn smape_is_symmetric(a in proptest::collection::vec(-1e3f64..1e3, 1..20),
                              f in proptest::collection::vec(-1e3f64..1e3, 1..20)) {
            let n = a.len().min(f.len());
            let (a, f) = (&a[..n], &f[..n]);
            let lhs = smape(a, f).unwrap();
            let rhs = smape(f, a).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
            prop_assert!((0.0..=200.0).contains(&lhs));
        }

        #[test]
        fn metrics_are_permutation_consistent(
            pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..20),
            seed in 0u64..1000,
        ) {
            let (a, f): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
            let mut idx: Vec<usize> = (0..a.len()).collect();
            // Cheap deterministic shuffle.
            let mut s = seed;
            for i in (1..idx.len()).rev() {
                s = crate::par::derive_seed(s, i as u64);
                idx.swap(i, (s % (i as u64 + 1)) as usize);
            }
            let ap: Vec<f64> = idx.iter().map(|&i| a[i]).collect();
            let fp: Vec<f64> = idx.iter().map(|&i| f[i]).collect();
            prop_assert!((mae(&a, &f).unwrap() - mae(&ap, &fp).unwrap()).abs() < 1e-9);
            prop_assert!((smape(&a, &f).unwrap() - smape(&ap, &fp).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn mase_is_scale_invariant(c in 0.01f64..100.0) {
            let h = series(&[1.0, 3.0, 2.0, 5.0, 4.0], 1);
            let hc = series(&[c, 3.0 * c, 2.0 * c, 5.0 * c, 4.0 * c], 1);
            let a = [6.0, 7.0];
            let f = [5.5, 8.0];
            let ac: Vec<f64> = a.iter().map(|v| v * c).collect();
            let fc: Vec<f64> = f.iter().map(|v| v * c).collect();
            let base = mase(&a, &f, &h).unwrap();
            let scaled = mase(&ac, &fc, &hc).unwrap();
            prop_assert!((base - scaled).abs() < 1e-9 * base.max(1.0));
        }

        #[test]
        fn ari_is_relabel_invariant(labels in proptest::collection::vec(0usize..3, 2..12)) {
            let relabeled: Vec<usize> = labels.iter().map(|&l| (l + 1) % 3).collect();
            prop_assert_eq!(ari(&labels, &labels).unwrap(), 1.0);
            let other: Vec<usize> = labels.iter().rev().cloned().collect();
            let base = ari(&labels, &other).unwrap();
            let swapped = ari(&relabeled, &other).unwrap();
            prop_assert!((base - swapped).abs() < 1e-12);
        }
    }
}
