//! Long-form CSV datasets with an optional JSON metadata companion.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Dataset, IndexRange, SplitSpec, TimeSeries};

/// Per-series split layout as stored on disk (1-based inclusive ranges).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMeta {
    pub train: [usize; 2],
    pub validation: [usize; 2],
    pub test_horizon: usize,
}

/// Optional per-series metadata; missing fields fall back to defaults
/// (seasonal period 1; test horizon 5 with train covering the pre-test
/// range and validation starting after the configured lag).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seasonal_period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitMeta>,
}

pub type DatasetMetadata = BTreeMap<String, SeriesMeta>;

const DEFAULT_TEST_HORIZON: usize = 5;

#[derive(Debug, Deserialize)]
struct CsvRow {
    series_id: String,
    t: usize,
    value: f64,
}

/// Reads a dataset from long-form CSV plus optional metadata.
///
/// `default_lag` resolves the default validation range `(lag+1)..=(L-h)`
/// for series without explicit split metadata; it has no effect on series
/// whose metadata pins a split.
pub fn read_dataset(
    csv_path: &Path,
    metadata_path: Option<&Path>,
    default_lag: usize,
) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(csv_path)
        .map_err(|e| Error::MalformedData(format!("{}: {e}", csv_path.display())))?;
    let mut order: Vec<String> = Vec::new();
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (line, row) in reader.deserialize::<CsvRow>().enumerate() {
        let row = row.map_err(|e| {
            Error::MalformedData(format!("{} row {}: {e}", csv_path.display(), line + 2))
        })?;
        if !row.value.is_finite() {
            return Err(Error::MalformedData(format!(
                "{} row {}: series '{}' has non-finite value at t={}",
                csv_path.display(),
                line + 2,
                row.series_id,
                row.t
            )));
        }
        let entry = values.entry(row.series_id.clone()).or_default();
        if entry.is_empty() {
            order.push(row.series_id.clone());
        }
        if row.t != entry.len() + 1 {
            return Err(Error::MalformedData(format!(
                "series '{}': expected t={}, found t={}",
                row.series_id,
                entry.len() + 1,
                row.t
            )));
        }
        entry.push(row.value);
    }
    if order.is_empty() {
        return Err(Error::MalformedData(format!(
            "{}: no data rows",
            csv_path.display()
        )));
    }

    let metadata: DatasetMetadata = match metadata_path {
        None => DatasetMetadata::new(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let meta: DatasetMetadata = serde_json::from_str(&text)
                .map_err(|e| Error::MalformedData(format!("{}: {e}", p.display())))?;
            for id in meta.keys() {
                if !values.contains_key(id) {
                    return Err(Error::MalformedData(format!(
                        "{}: metadata references unknown series '{id}'",
                        p.display()
                    )));
                }
            }
            meta
        }
    };

    let mut series = Vec::with_capacity(order.len());
    let mut splits = Vec::with_capacity(order.len());
    for id in order {
        let vals = values.remove(&id).unwrap();
        let len = vals.len();
        let meta = metadata.get(&id).cloned().unwrap_or_default();
        let split = match meta.split {
            Some(m) => SplitSpec {
                train: IndexRange::new(m.train[0], m.train[1]),
                validation: IndexRange::new(m.validation[0], m.validation[1]),
                test_horizon: m.test_horizon,
            },
            None => SplitSpec::in_sample(len, DEFAULT_TEST_HORIZON, default_lag)
                .map_err(|e| Error::MalformedData(format!("series '{id}': {e}")))?,
        };
        series.push(TimeSeries::new(id, vals, meta.seasonal_period.unwrap_or(1))?);
        splits.push(split);
    }
    Dataset::new(series, splits)
}

/// Writes a dataset as long-form CSV. Values use the shortest decimal
/// representation that round-trips, so reading the file back is lossless.
pub fn write_dataset(dataset: &Dataset, csv_path: &Path) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(csv_path).map_err(|e| csv_io_error(csv_path, e))?;
    writer
        .write_record(["series_id", "t", "value"])
        .map_err(|e| csv_io_error(csv_path, e))?;
    for s in dataset.series() {
        for (t, v) in s.values.iter().enumerate() {
            writer
                .write_record([s.id.as_str(), &(t + 1).to_string(), &format!("{v}")])
                .map_err(|e| csv_io_error(csv_path, e))?;
        }
    }
    writer.flush().map_err(|e| Error::io(csv_path, e))
}

/// Writes the companion metadata JSON describing every series' seasonal
/// period and split.
pub fn write_metadata(dataset: &Dataset, path: &Path) -> Result<()> {
    let meta: DatasetMetadata = dataset
        .series()
        .iter()
        .zip(dataset.splits())
        .map(|(s, sp)| {
            (
                s.id.clone(),
                SeriesMeta {
                    seasonal_period: Some(s.seasonal_period),
                    split: Some(SplitMeta {
                        train: [sp.train.start, sp.train.end],
                        validation: [sp.validation.start, sp.validation.end],
                        test_horizon: sp.test_horizon,
                    }),
                },
            )
        })
        .collect();
    let text = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::MalformedData(format!("{}: {e}", path.display())))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_io_error(path: &Path, e: csv::Error) -> Error {
    Error::MalformedData(format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_dataset() -> Dataset {
        let a = TimeSeries::new("a", (1..=12).map(|v| v as f64 * 0.25).collect(), 1).unwrap();
        let b = TimeSeries::new("b", (1..=10).map(|v| (v as f64).sin()).collect(), 4).unwrap();
        let sa = SplitSpec::in_sample(12, 5, 1).unwrap();
        let sb = SplitSpec::in_sample(10, 5, 1).unwrap();
        Dataset::new(vec![a, b], vec![sa, sb]).unwrap()
    }

    #[test]
    fn round_trip_with_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("data.csv");
        let meta_path = dir.path().join("data.meta.json");
        let dataset = sample_dataset();
        write_dataset(&dataset, &csv_path).unwrap();
        write_metadata(&dataset, &meta_path).unwrap();
        let back = read_dataset(&csv_path, Some(&meta_path), 1).unwrap();
        assert_eq!(dataset, back);
    }

    #[test]
    fn defaults_apply_without_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("data.csv");
        write_dataset(&sample_dataset(), &csv_path).unwrap();
        let back = read_dataset(&csv_path, None, 2).unwrap();
        let sp = back.splits()[0];
        assert_eq!(sp.test_horizon, 5);
        assert_eq!(sp.train, IndexRange::new(1, 7));
        assert_eq!(sp.validation, IndexRange::new(3, 7));
        assert_eq!(back.series()[0].seasonal_period, 1);
    }

    #[test]
    fn overlapping_metadata_split_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("data.csv");
        let meta_path = dir.path().join("m.json");
        write_dataset(&sample_dataset(), &csv_path).unwrap();
        let meta = r#"{"a": {"split": {"train": [1, 7], "validation": [3, 7], "test_horizon": 5}}}"#;
        std::fs::write(&meta_path, meta).unwrap();
        let back = read_dataset(&csv_path, Some(&meta_path), 1).unwrap();
        assert_eq!(back.splits()[0].validation, IndexRange::new(3, 7));
    }

    #[test]
    fn gap_in_t_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("data.csv");
        std::fs::write(&csv_path, "series_id,t,value\na,1,1.0\na,2,2.0\na,4,3.0\n").unwrap();
        let err = read_dataset(&csv_path, None, 1).unwrap_err();
        assert!(matches!(err, Error::MalformedData(_)), "{err}");
        assert!(err.to_string().contains("'a'"), "{err}");
    }

    #[test]
    fn non_finite_value_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("data.csv");
        std::fs::write(&csv_path, "series_id,t,value\na,1,1.0\na,2,NaN\n").unwrap();
        assert!(matches!(
            read_dataset(&csv_path, None, 1),
            Err(Error::MalformedData(_))
        ));
    }

    #[test]
    fn unknown_metadata_id_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("data.csv");
        let meta_path = dir.path().join("m.json");
        write_dataset(&sample_dataset(), &csv_path).unwrap();
        std::fs::write(&meta_path, r#"{"zzz": {}}"#).unwrap();
        assert!(read_dataset(&csv_path, Some(&meta_path), 1).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_lossless_for_finite_doubles(
            raw in proptest::collection::vec(-1e12f64..1e12, 8..20)
        ) {
            let dir = tempfile::tempdir().unwrap();
            let csv_path = dir.path().join("data.csv");
            let series = TimeSeries::new("s", raw.clone(), 1).unwrap();
            let split = SplitSpec::in_sample(raw.len(), 2, 1).unwrap();
            let dataset = Dataset::new(vec![series], vec![split]).unwrap();
            write_dataset(&dataset, &csv_path).unwrap();
            let meta_path = dir.path().join("m.json");
            write_metadata(&dataset, &meta_path).unwrap();
            let back = read_dataset(&csv_path, Some(&meta_path), 1).unwrap();
            prop_assert_eq!(&back.series()[0].values, &raw);
        }
    }
}
