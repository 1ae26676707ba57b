//! Dataset ingestion, preprocessing, splitting and synthetic stream generation.

mod csv_io;
mod preprocess;
mod split;
mod synthetic;

use std::ops::Range;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{DriftlabError, Result};

pub use csv_io::{load_csv, write_csv, write_csv_with_marker};
pub use preprocess::{encode_and_normalize, CategoryVocab, NormStats};
pub use split::{in_order_split, shuffle_split, DataSplits, MIN_SPLIT_SAMPLES};
pub use synthetic::{
    generate_moving_rbf, generate_rbf, DriftKind, MovingRbfMeta, SyntheticSpec, CENTROID_BOX,
};

/// A string-valued feature column awaiting one-hot expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub name: String,
    pub values: Vec<String>,
}

/// Feature matrix plus dense integer labels.
///
/// Numeric features live in `features`. Columns that were read as strings are
/// kept in `categorical` until [`encode_and_normalize`] expands them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub k: usize,
    pub feature_names: Vec<String>,
    pub categorical: Vec<CategoricalColumn>,
    /// Original label spelling for each class index, when known.
    pub class_names: Vec<String>,
}

impl Dataset {
    /// Builds a purely numeric dataset and checks its invariants.
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        k: usize,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let class_names = (0..k).map(|c| c.to_string()).collect();
        let ds = Dataset {
            features,
            labels,
            k,
            feature_names,
            categorical: Vec::new(),
            class_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.features.nrows();
        if n == 0 || self.labels.is_empty() {
            return Err(DriftlabError::EmptyDataset);
        }
        if self.labels.len() != n {
            return Err(DriftlabError::DimensionMismatch {
                expected: n,
                found: self.labels.len(),
            });
        }
        if self.feature_names.len() != self.features.ncols() {
            return Err(DriftlabError::DimensionMismatch {
                expected: self.features.ncols(),
                found: self.feature_names.len(),
            });
        }
        if self.q() == 0 {
            return Err(DriftlabError::InvalidArgument(
                "dataset has no feature columns".into(),
            ));
        }
        if let Some(&bad) = self.labels.iter().find(|&&y| y >= self.k) {
            return Err(DriftlabError::InvalidArgument(format!(
                "label {bad} out of range for k = {}",
                self.k
            )));
        }
        for col in &self.categorical {
            if col.values.len() != n {
                return Err(DriftlabError::DimensionMismatch {
                    expected: n,
                    found: col.values.len(),
                });
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Feature count, including categorical columns not yet expanded.
    pub fn q(&self) -> usize {
        self.features.ncols() + self.categorical.len()
    }

    /// Gathers the given rows, in order, into a new dataset.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            k: self.k,
            feature_names: self.feature_names.clone(),
            categorical: self
                .categorical
                .iter()
                .map(|c| CategoricalColumn {
                    name: c.name.clone(),
                    values: rows.iter().map(|&r| c.values[r].clone()).collect(),
                })
                .collect(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn slice(&self, range: Range<usize>) -> Dataset {
        let rows: Vec<usize> = range.collect();
        self.select_rows(&rows)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}
