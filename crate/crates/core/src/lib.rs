//! Task-sensitive concept drift detection.
//!
//! A classifier is trained with a constrained low-dimensional embedding in
//! which every class is pulled toward a learnable centroid. At inference the
//! distances from each incoming sample to those centroids are summarised and
//! fed to an unsupervised change detector, so that only drift which hurts the
//! classification task is reported.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: CSV ingestion, preprocessing, splits and synthetic streams.
//! - [`neural`]: the MLP encoder/classifier and its training loop.
//! - [`embedding_stats`]: distance features and reference statistics.
//! - [`detectors`]: EMAD, ZSD, IKS and HDDDM plus the stream runner.
//! - [`drift`]: information-gain ranking and drift injection.
//! - [`eval`]: scoring, aggregation, Friedman/Nemenyi and CD diagrams.
//! - [`harness`]: experiment configuration and orchestration.

pub mod data;
pub mod detectors;
pub mod drift;
pub mod embedding_stats;
pub mod error;
pub mod eval;
pub mod harness;
pub mod neural;

pub use error::{DriftlabError, Result};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
