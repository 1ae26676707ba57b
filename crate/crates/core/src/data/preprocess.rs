use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{DriftlabError, Result};

/// Levels of one categorical column, in first-appearance order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryVocab {
    pub name: String,
    pub levels: Vec<String>,
}

/// Per-feature standardisation parameters (population moments).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    #[serde(default)]
    pub categories: Vec<CategoryVocab>,
}

impl NormStats {
    /// Feature count after one-hot expansion.
    pub fn q(&self) -> usize {
        self.mean.len()
    }

    /// Standardises every column of an already-encoded matrix in place.
    /// Columns with zero spread map to 0.
    pub fn apply(&self, features: &mut Array2<f64>) -> Result<()> {
        if features.ncols() != self.q() {
            return Err(DriftlabError::DimensionMismatch {
                expected: self.q(),
                found: features.ncols(),
            });
        }
        for (j, mut col) in features.columns_mut().into_iter().enumerate() {
            let (mu, sd) = (self.mean[j], self.std[j]);
            if sd > 0.0 {
                col.mapv_inplace(|v| (v - mu) / sd);
            } else {
                col.fill(0.0);
            }
        }
        Ok(())
    }
}

fn one_hot(ds: &Dataset, vocabs: &[CategoryVocab]) -> (Array2<f64>, Vec<String>) {
    let n = ds.n();
    let width: usize = vocabs.iter().map(|v| v.levels.len()).sum();
    let mut block = Array2::zeros((n, width));
    let mut names = Vec::with_capacity(width);
    let mut offset = 0;
    for (col, vocab) in ds.categorical.iter().zip(vocabs) {
        for (i, value) in col.values.iter().enumerate() {
            // Unseen levels encode as an all-zero group.
            if let Some(level) = vocab.levels.iter().position(|l| l == value) {
                block[[i, offset + level]] = 1.0;
            }
        }
        names.extend(vocab.levels.iter().map(|l| format!("{}={}", vocab.name, l)));
        offset += vocab.levels.len();
    }
    (block, names)
}

fn fit_vocab(ds: &Dataset) -> Vec<CategoryVocab> {
    ds.categorical
        .iter()
        .map(|col| {
            let mut levels: Vec<String> = Vec::new();
            for v in &col.values {
                if !levels.contains(v) {
                    levels.push(v.clone());
                }
            }
            CategoryVocab {
                name: col.name.clone(),
                levels,
            }
        })
        .collect()
}

fn population_moments(features: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = features.nrows() as f64;
    features
        .columns()
        .into_iter()
        .map(|col| {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .unzip()
}

/// One-hot expands categorical columns and standardises every feature.
///
/// With `stats = None` the vocabulary and moments are fitted on `ds` (pass the
/// training portion); otherwise the supplied statistics are applied.
pub fn encode_and_normalize(ds: &Dataset, stats: Option<&NormStats>) -> Result<(Dataset, NormStats)> {
    let vocabs = match stats {
        Some(s) => {
            if s.categories.len() != ds.categorical.len() {
                return Err(DriftlabError::DimensionMismatch {
                    expected: s.categories.len(),
                    found: ds.categorical.len(),
                });
            }
            s.categories.clone()
        }
        None => fit_vocab(ds),
    };

    let (block, cat_names) = one_hot(ds, &vocabs);
    let mut features = concatenate(Axis(1), &[ds.features.view(), block.view()])
        .expect("row counts agree");
    let mut feature_names = ds.feature_names.clone();
    feature_names.extend(cat_names);

    let stats = match stats {
        Some(s) => {
            if s.q() != features.ncols() {
                return Err(DriftlabError::DimensionMismatch {
                    expected: s.q(),
                    found: features.ncols(),
                });
            }
            s.clone()
        }
        None => {
            let (mean, std) = population_moments(&features);
            NormStats {
                mean,
                std,
                categories: vocabs,
            }
        }
    };
    stats.apply(&mut features)?;

    let out = Dataset {
        features,
        labels: ds.labels.clone(),
        k: ds.k,
        feature_names,
        categorical: Vec::new(),
        class_names: ds.class_names.clone(),
    };
    out.validate()?;
    Ok((out, stats))
}
