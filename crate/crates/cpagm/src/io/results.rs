//! Structured result persistence: JSON envelopes for clustering and grid
//! outcomes, CSV for grid tables and benchmark aggregates.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::BenchRow;
use crate::selection::GridCell;

/// Run provenance kept in its own field so result diffs stay clean: strip
/// `meta` before comparing emitted JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool_version: String,
    pub created_unix: u64,
}

impl RunMeta {
    pub fn now() -> Self {
        RunMeta {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// A payload plus its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    #[serde(flatten)]
    pub payload: T,
    pub meta: RunMeta,
}

/// Serializes `payload` (wrapped in an [`Envelope`]) as pretty JSON.
pub fn write_json<T: Serialize>(payload: &T, path: &Path) -> Result<()> {
    let envelope = Envelope {
        payload,
        meta: RunMeta::now(),
    };
    let text = serde_json::to_string_pretty(&envelope)
        .map_err(|e| Error::MalformedData(format!("{}: {e}", path.display())))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Envelope<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedData(format!("{}: {e}", path.display())))
}

/// Grid table CSV: one row per cell with columns
/// `K,l,metric,avg_error,status,seed`.
pub fn write_grid_csv(table: &[GridCell], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::MalformedData(format!("{}: {e}", path.display())))?;
    writer
        .write_record(["K", "l", "metric", "avg_error", "status", "seed"])
        .map_err(|e| Error::MalformedData(format!("{}: {e}", path.display())))?;
    for cell in table {
        let err = cell.avg_error.map(|v| format!("{v}")).unwrap_or_default();
        writer
            .write_record([
                cell.k.to_string(),
                cell.l.to_string(),
                cell.metric.name().to_string(),
                err,
                cell.status.clone(),
                cell.seed.to_string(),
            ])
            .map_err(|e| Error::MalformedData(format!("{}: {e}", path.display())))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Benchmark aggregate CSV: one row per `(cell, method, metric)` with
/// columns `scenario,T,N,method,metric,mean,sd,trials,seed`.
pub fn write_benchmark_csv(rows: &[BenchRow], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::MalformedData(format!("{}: {e}", path.display())))?;
    writer
        .write_record(["scenario", "T", "N", "method", "metric", "mean", "sd", "trials", "seed"])
        .map_err(|e| Error::MalformedData(format!("{}: {e}", path.display())))?;
    for r in rows {
        writer
            .write_record([
                r.scenario.clone(),
                r.t.to_string(),
                r.n.to_string(),
                r.method.clone(),
                r.metric.clone(),
                format!("{}", r.mean),
                format!("{}", r.sd),
                r.trials.to_string(),
                r.seed.to_string(),
            ])
            .map_err(|e| Error::MalformedData(format!("{}: {e}", path.display())))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
