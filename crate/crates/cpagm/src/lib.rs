//! Clustering a collection of time series by the prediction accuracy of
//! pooled global forecasting models.
//!
//! The core procedure alternates two steps until the assignment stabilizes:
//! one global forecasting model is fitted per cluster by pooling the
//! lag-embedded training rows of its member series, then every series is
//! reassigned to the cluster whose model predicts its validation period
//! best. The resulting objective is a plain sum of forecast errors, so the
//! partition quality is measured directly by predictive capability, and the
//! same error generalizes into a natural criterion for choosing the number
//! of clusters and the lag order.
//!
//! The crate ships the clustering algorithm ([`cluster`]), linear and
//! tree-ensemble global models plus per-series AR fitting ([`models`]),
//! forecast-accuracy and partition-agreement metrics ([`metrics`]),
//! reference baselines ([`baselines`]), grid search over `(K, l)`
//! ([`selection`]), seeded scenario simulators ([`simulation`]), a
//! Monte Carlo benchmark harness ([`harness`]) and file formats plus a CLI
//! ([`io`]).
//!
//! Inner loops (trials, restarts, per-series distances, grid cells, tree
//! building) are data-parallel via rayon under the default `parallel`
//! feature; disabling it yields a sequential build with identical results.

pub mod baselines;
pub mod cli;
pub mod cluster;
pub mod error;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod models;
mod par;
pub mod selection;
pub mod simulation;
pub mod types;

pub use error::{Error, Result};
pub use par::{derive_seed, derive_seed2};
pub use types::{Dataset, IndexRange, Partition, SplitSpec, TimeSeries};
