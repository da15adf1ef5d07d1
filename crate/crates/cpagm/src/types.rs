//! Core domain types: series, train/validation/test splits, datasets and
//! cluster partitions.
//!
//! All index ranges are 1-based and inclusive, matching the on-disk dataset
//! format where observation indices run `1..=L`. Types are immutable after
//! construction and safe to share across threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 1-based inclusive range of observation indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRange {
    pub start: usize,
    pub end: usize,
}

impl IndexRange {
    pub fn new(start: usize, end: usize) -> Self {
        IndexRange { start, end }
    }

    pub fn len(&self) -> usize {
        if self.end >= self.start {
            self.end - self.start + 1
        } else {
            0
        }
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    /// Converts to a 0-based half-open range for slicing.
    pub fn as_slice_range(&self) -> std::ops::Range<usize> {
        (self.start - 1)..self.end
    }
}

/// One observed series with its seasonal period and identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    pub values: Vec<f64>,
    /// Seasonal period `m` (1 = nonseasonal). Used only by the scaled-error
    /// metric's naive baseline.
    pub seasonal_period: usize,
}

impl TimeSeries {
    pub fn new(id: impl Into<String>, values: Vec<f64>, seasonal_period: usize) -> Result<Self> {
        let id = id.into();
        if values.is_empty() {
            return Err(Error::InvalidArgument(format!("series '{id}' is empty")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "series '{id}' has a non-finite value at t={}",
                pos + 1
            )));
        }
        if seasonal_period == 0 {
            return Err(Error::InvalidArgument(format!(
                "series '{id}': seasonal_period must be >= 1"
            )));
        }
        Ok(TimeSeries {
            id,
            values,
            seasonal_period,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-series training/validation/test layout.
///
/// `train` and `validation` are consecutive-index ranges inside
/// `[1, L - test_horizon]`; together they must cover that whole span
/// (overlap is allowed). The last `test_horizon` observations are reserved
/// for final accuracy reporting and never touched while clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: IndexRange,
    pub validation: IndexRange,
    pub test_horizon: usize,
}

impl SplitSpec {
    /// In-sample layout: train on everything before the test block, score
    /// reassignment on the one-step fitted errors at `lag+1 ..= L-h`.
    pub fn in_sample(series_len: usize, test_horizon: usize, lag: usize) -> Result<Self> {
        let pre_test = series_len
            .checked_sub(test_horizon)
            .filter(|v| *v >= 1)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "series of length {series_len} cannot reserve {test_horizon} test observations"
                ))
            })?;
        if lag + 1 > pre_test {
            return Err(Error::InvalidArgument(format!(
                "in-sample split needs lag+1 <= L-h (lag={lag}, L={series_len}, h={test_horizon})"
            )));
        }
        Ok(SplitSpec {
            train: IndexRange::new(1, pre_test),
            validation: IndexRange::new(lag + 1, pre_test),
            test_horizon,
        })
    }

    /// Out-of-sample layout: a validation block of `validation_len`
    /// observations disjoint from (and directly after) the training block.
    pub fn out_of_sample(
        series_len: usize,
        test_horizon: usize,
        validation_len: usize,
    ) -> Result<Self> {
        let pre_test = series_len
            .checked_sub(test_horizon)
            .filter(|v| *v >= 1)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "series of length {series_len} cannot reserve {test_horizon} test observations"
                ))
            })?;
        if validation_len == 0 || validation_len >= pre_test {
            return Err(Error::InvalidArgument(format!(
                "out-of-sample split needs 0 < validation_len < L-h \
                 (validation_len={validation_len}, L={series_len}, h={test_horizon})"
            )));
        }
        Ok(SplitSpec {
            train: IndexRange::new(1, pre_test - validation_len),
            validation: IndexRange::new(pre_test - validation_len + 1, pre_test),
            test_horizon,
        })
    }

    /// Checks the split invariants against a series of length `series_len`.
    pub fn validate(&self, series_len: usize) -> Result<()> {
        let pre_test = series_len.saturating_sub(self.test_horizon);
        if pre_test < 1 {
            return Err(Error::InvalidArgument(format!(
                "test_horizon {} leaves no observations in a series of length {series_len}",
                self.test_horizon
            )));
        }
        for (name, r) in [("train", self.train), ("validation", self.validation)] {
            if r.is_empty() || r.start < 1 || r.end > pre_test {
                return Err(Error::InvalidArgument(format!(
                    "{name} range {}..{} is not a nonempty range inside 1..{pre_test}",
                    r.start, r.end
                )));
            }
        }
        if self.train.start > self.validation.start {
            return Err(Error::InvalidArgument(
                "training must begin no later than validation".into(),
            ));
        }
        // Cover condition: train and validation jointly span 1..=pre_test.
        let covered_end = self.train.end.max(self.validation.end);
        let contiguous = self.validation.start <= self.train.end + 1;
        if self.train.start != 1 || covered_end != pre_test || !contiguous {
            return Err(Error::InvalidArgument(format!(
                "train {}..{} and validation {}..{} do not cover 1..{pre_test}",
                self.train.start, self.train.end, self.validation.start, self.validation.end
            )));
        }
        Ok(())
    }

    /// The contiguous union of train and validation (all pre-test data).
    pub fn fit_range(&self) -> IndexRange {
        IndexRange::new(
            self.train.start.min(self.validation.start),
            self.train.end.max(self.validation.end),
        )
    }
}

/// An ordered collection of series with one split per series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    series: Vec<TimeSeries>,
    splits: Vec<SplitSpec>,
}

impl Dataset {
    pub fn new(series: Vec<TimeSeries>, splits: Vec<SplitSpec>) -> Result<Self> {
        if series.len() != splits.len() {
            return Err(Error::InvalidArgument(format!(
                "{} series but {} splits",
                series.len(),
                splits.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &series {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate series id '{}'",
                    s.id
                )));
            }
        }
        for (s, sp) in series.iter().zip(&splits) {
            sp.validate(s.len())
                .map_err(|e| Error::InvalidArgument(format!("series '{}': {e}", s.id)))?;
        }
        Ok(Dataset { series, splits })
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn series(&self) -> &[TimeSeries] {
        &self.series
    }

    pub fn splits(&self) -> &[SplitSpec] {
        &self.splits
    }

    pub fn get(&self, i: usize) -> (&TimeSeries, &SplitSpec) {
        (&self.series[i], &self.splits[i])
    }

    /// Rebuilds every in-sample validation range as `lag+1 ..= train_end`.
    ///
    /// Grid searches over the lag order use this so that each cell scores
    /// reassignment on exactly the points where its one-step prediction is
    /// defined.
    pub fn with_in_sample_validation(&self, lag: usize) -> Result<Dataset> {
        let splits = self
            .series
            .iter()
            .zip(&self.splits)
            .map(|(s, sp)| {
                if lag + 1 > sp.train.end {
                    return Err(Error::InvalidArgument(format!(
                        "series '{}': lag {lag} leaves no validation points before index {}",
                        s.id, sp.train.end
                    )));
                }
                Ok(SplitSpec {
                    train: sp.train,
                    validation: IndexRange::new(lag + 1, sp.train.end),
                    test_horizon: sp.test_horizon,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(self.series.clone(), splits)
    }

    /// Pre-test observations of series `i` (everything before the test block).
    pub(crate) fn pre_test(&self, i: usize) -> &[f64] {
        let (s, sp) = self.get(i);
        &s.values[..s.len() - sp.test_horizon]
    }

    /// Test block of series `i` (the final `test_horizon` observations).
    pub(crate) fn test_block(&self, i: usize) -> &[f64] {
        let (s, sp) = self.get(i);
        &s.values[s.len() - sp.test_horizon..]
    }
}

/// Assignment of each series to one of `k` clusters.
///
/// Labels are dense integers in `[0, k)`. Empty clusters are representable
/// (a label simply unused); consumers must not assume every label occurs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub k: usize,
    /// Clustering objective (sum of per-series validation errors), set once
    /// evaluated.
    pub objective: Option<f64>,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for k={k}"
            )));
        }
        Ok(Partition {
            labels,
            k,
            objective: None,
        })
    }

    /// Member indices per cluster, in dataset order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            m[l].push(i);
        }
        m
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_values() {
        assert!(TimeSeries::new("a", vec![1.0, f64::NAN], 1).is_err());
        assert!(TimeSeries::new("a", vec![1.0, f64::INFINITY], 1).is_err());
        assert!(TimeSeries::new("a", vec![], 1).is_err());
    }

    #[test]
    fn in_sample_split_arithmetic() {
        // T=100, h=8, lag=4: train 1..92, validation 5..92.
        let sp = SplitSpec::in_sample(100, 8, 4).unwrap();
        assert_eq!(sp.train, IndexRange::new(1, 92));
        assert_eq!(sp.validation, IndexRange::new(5, 92));
        sp.validate(100).unwrap();
        assert_eq!(sp.fit_range(), IndexRange::new(1, 92));
    }

    #[test]
    fn out_of_sample_split_is_disjoint() {
        let sp = SplitSpec::out_of_sample(100, 5, 12).unwrap();
        assert_eq!(sp.train, IndexRange::new(1, 83));
        assert_eq!(sp.validation, IndexRange::new(84, 95));
        sp.validate(100).unwrap();
    }

    #[test]
    fn cover_condition_rejects_gaps() {
        let sp = SplitSpec {
            train: IndexRange::new(1, 40),
            validation: IndexRange::new(45, 95),
            test_horizon: 5,
        };
        assert!(sp.validate(100).is_err());
    }

    #[test]
    fn overlapping_train_validation_is_accepted() {
        let sp = SplitSpec {
            train: IndexRange::new(1, 95),
            validation: IndexRange::new(10, 95),
            test_horizon: 5,
        };
        sp.validate(100).unwrap();
    }

    #[test]
    fn dataset_rejects_duplicate_ids() {
        let s = |id: &str| TimeSeries::new(id, vec![0.0; 20], 1).unwrap();
        let sp = SplitSpec::in_sample(20, 5, 1).unwrap();
        assert!(Dataset::new(vec![s("a"), s("a")], vec![sp, sp]).is_err());
        assert!(Dataset::new(vec![s("a"), s("b")], vec![sp, sp]).is_ok());
    }

    #[test]
    fn partition_label_bounds() {
        assert!(Partition::new(vec![0, 1, 2], 3).is_ok());
        assert!(Partition::new(vec![0, 3], 3).is_err());
        let p = Partition::new(vec![0, 0, 2], 3).unwrap();
        assert_eq!(p.cluster_sizes(), vec![2, 0, 1]);
        assert_eq!(p.members()[2], vec![2]);
    }
}
