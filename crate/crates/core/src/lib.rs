//! RSSI fingerprint localization for LoRaWAN deployments.
//!
//! The crate loads fingerprint datasets (one row per uplink message, one RSSI
//! column per gateway), turns raw RSSI into one of four data representations,
//! and estimates positions with three regressors:
//!
//! - [`knn::KnnModel`]: exhaustive k-nearest-neighbour search over a choice of
//!   [`metrics::MetricKind`] distances,
//! - [`etrees::Forest`]: extremely randomized trees with a two-dimensional
//!   (latitude, longitude) output,
//! - [`neural::MlpModel`]: a batch-normalized ReLU multilayer perceptron
//!   trained with Adam, dropout and early stopping.
//!
//! Errors are measured on the sphere with [`eval::haversine`], and
//! [`harness`] ties everything together into sweeps, tables and the `lorafp`
//! command line tool.

pub mod error;
pub mod etrees;
pub mod eval;
pub mod harness;
pub mod ingest;
pub mod knn;
pub mod metrics;
pub mod neural;
pub mod report;
pub mod represent;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{haversine, Coord, ErrorStats};
pub use ingest::{
    ColumnMapping, Dataset, Fingerprint, SplitManifest, GATEWAY_COUNT, SENTINEL_RSSI,
};
pub use metrics::MetricKind;
pub use represent::{RepresentationConfig, RepresentationKind};

/// Runs `f` over `items` in parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}
