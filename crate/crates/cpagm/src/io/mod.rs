//! Dataset ingestion and serialization, result persistence, and the
//! command-line interface.
//!
//! Datasets travel as long-form CSV (`series_id,t,value` with `t` running
//! `1..=L` per series) so collections with heterogeneous lengths fit
//! naturally; an optional companion JSON file carries per-series seasonal
//! periods and split layouts. No preprocessing is applied on ingestion.

mod dataset;
mod results;

pub use dataset::{read_dataset, write_dataset, write_metadata, DatasetMetadata, SeriesMeta, SplitMeta};
pub use results::{
    read_json, write_benchmark_csv, write_grid_csv, write_json, Envelope, RunMeta,
};
