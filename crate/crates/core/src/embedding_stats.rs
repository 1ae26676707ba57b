//! Distance statistics in the embedding space.

use std::collections::VecDeque;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{DriftlabError, Result};
use crate::neural::{Centroids, MlpParams};

/// Euclidean distance from `e` to every centroid.
pub fn distances(e: ArrayView1<f64>, c: &Centroids) -> Vec<f64> {
    c.0.rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(e.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Which statistics are extracted from a distance vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureLayout {
    /// Distance to the closest centroid.
    ScalarMin,
    /// `(mean, std, max, min)` of the distances.
    Summary4,
}

impl FeatureLayout {
    pub fn width(self) -> usize {
        match self {
            FeatureLayout::ScalarMin => 1,
            FeatureLayout::Summary4 => 4,
        }
    }

    pub fn extract(self, d: &[f64]) -> Result<FeatureVector> {
        match self {
            FeatureLayout::ScalarMin => feature_min(d),
            FeatureLayout::Summary4 => feature_summary(d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub layout: FeatureLayout,
    pub values: Vec<f64>,
}

fn non_empty(d: &[f64]) -> Result<()> {
    if d.is_empty() {
        Err(DriftlabError::InvalidArgument("empty distance vector".into()))
    } else {
        Ok(())
    }
}

pub fn feature_min(d: &[f64]) -> Result<FeatureVector> {
    non_empty(d)?;
    Ok(FeatureVector {
        layout: FeatureLayout::ScalarMin,
        values: vec![d.iter().copied().fold(f64::INFINITY, f64::min)],
    })
}

/// Mean, population std, max and min of the distances.
pub fn feature_summary(d: &[f64]) -> Result<FeatureVector> {
    non_empty(d)?;
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    // Rounding can push the mean a hair outside [min, max] for near-constant input.
    Ok(FeatureVector {
        layout: FeatureLayout::Summary4,
        values: vec![mean.clamp(min, max), var.sqrt(), max, min],
    })
}

/// Feature vectors for every row of `x` under the given model.
pub fn stream_features(
    params: &MlpParams,
    centroids: &Centroids,
    x: ArrayView2<f64>,
    layout: FeatureLayout,
) -> Result<Vec<FeatureVector>> {
    let (emb, _) = params.predict(x)?;
    emb.axis_iter(Axis(0))
        .map(|e| layout.extract(&distances(e, centroids)))
        .collect()
}

/// Bounded FIFO of feature vectors with running per-component moments.
#[derive(Debug, Clone)]
pub struct ReferenceStatistics {
    capacity: usize,
    dim: usize,
    samples: VecDeque<Vec<f64>>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    /// Pushes since the sums were last rebuilt from the buffer.
    since_rebuild: usize,
}

impl ReferenceStatistics {
    pub fn new(dim: usize, capacity: usize) -> Result<Self> {
        if dim == 0 || capacity == 0 {
            return Err(DriftlabError::InvalidArgument(
                "reference statistics need a positive dimension and capacity".into(),
            ));
        }
        Ok(ReferenceStatistics {
            capacity,
            dim,
            samples: VecDeque::with_capacity(capacity),
            sum: vec![0.0; dim],
            sum_sq: vec![0.0; dim],
            since_rebuild: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.iter().map(Vec::as_slice)
    }

    /// Values of one component across the stored samples, oldest first.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[j]).collect()
    }

    /// Appends a sample, evicting the oldest one when full. Returns the evicted sample.
    pub fn push(&mut self, values: &[f64]) -> Result<Option<Vec<f64>>> {
        if values.len() != self.dim {
            return Err(DriftlabError::DimensionMismatch {
                expected: self.dim,
                found: values.len(),
            });
        }
        let evicted = if self.samples.len() == self.capacity {
            self.samples.pop_front()
        } else {
            None
        };
        if let Some(old) = &evicted {
            for j in 0..self.dim {
                self.sum[j] -= old[j];
                self.sum_sq[j] -= old[j] * old[j];
            }
        }
        for j in 0..self.dim {
            self.sum[j] += values[j];
            self.sum_sq[j] += values[j] * values[j];
        }
        self.samples.push_back(values.to_vec());
        self.since_rebuild += 1;
        if self.since_rebuild >= self.capacity {
            self.rebuild();
        }
        Ok(evicted)
    }

    // Bounds the round-off accumulated by add/subtract updates.
    fn rebuild(&mut self) {
        self.sum.iter_mut().for_each(|v| *v = 0.0);
        self.sum_sq.iter_mut().for_each(|v| *v = 0.0);
        for s in &self.samples {
            for j in 0..self.dim {
                self.sum[j] += s[j];
                self.sum_sq[j] += s[j] * s[j];
            }
        }
        self.since_rebuild = 0;
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.samples.len().max(1) as f64;
        self.sum.iter().map(|s| s / n).collect()
    }

    /// Population variance per component.
    pub fn variance(&self) -> Vec<f64> {
        let n = self.samples.len().max(1) as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, sq)| (sq / n - (s / n).powi(2)).max(0.0))
            .collect()
    }

    pub fn std(&self) -> Vec<f64> {
        self.variance().into_iter().map(f64::sqrt).collect()
    }
}

/// Reference statistics of the rows in `reference`. With `capacity` unset every
/// row is kept; otherwise only the most recent `capacity` rows survive.
pub fn init_reference(
    params: &MlpParams,
    centroids: &Centroids,
    reference: ArrayView2<f64>,
    layout: FeatureLayout,
    capacity: Option<usize>,
) -> Result<ReferenceStatistics> {
    if reference.nrows() == 0 {
        return Err(DriftlabError::InsufficientData("empty reference slice".into()));
    }
    let feats = stream_features(params, centroids, reference, layout)?;
    reference_from_features(&feats, capacity)
}

pub fn reference_from_features(
    feats: &[FeatureVector],
    capacity: Option<usize>,
) -> Result<ReferenceStatistics> {
    let first = feats
        .first()
        .ok_or_else(|| DriftlabError::InsufficientData("empty reference slice".into()))?;
    let mut stats =
        ReferenceStatistics::new(first.values.len(), capacity.unwrap_or(feats.len()))?;
    for f in feats {
        stats.push(&f.values)?;
    }
    Ok(stats)
}

/// Per-class generalised variance of an embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedVariance {
    pub per_class: Vec<f64>,
    pub mean: f64,
    /// Classes with fewer than two samples; their GV is reported as 0.
    pub degenerate: Vec<usize>,
}

/// Determinant of each class's covariance (about the class mean, population
/// normalisation) and their arithmetic mean.
pub fn generalized_variance(
    embeddings: ArrayView2<f64>,
    labels: &[usize],
    k: usize,
) -> Result<GeneralizedVariance> {
    if labels.len() != embeddings.nrows() {
        return Err(DriftlabError::DimensionMismatch {
            expected: embeddings.nrows(),
            found: labels.len(),
        });
    }
    let d = embeddings.ncols();
    let mut per_class = Vec::with_capacity(k);
    let mut degenerate = Vec::new();
    for class in 0..k {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if rows.is_empty() {
            return Err(DriftlabError::EmptyClass(class));
        }
        if rows.len() < 2 {
            degenerate.push(class);
            per_class.push(0.0);
            continue;
        }
        let sub = embeddings.select(Axis(0), &rows);
        let mean = sub.mean_axis(Axis(0)).expect("non-empty");
        let centered = &sub - &mean;
        let cov: Array2<f64> = centered.t().dot(&centered) / rows.len() as f64;
        debug_assert_eq!(cov.nrows(), d);
        per_class.push(determinant(cov).max(0.0));
    }
    let mean = per_class.iter().sum::<f64>() / k.max(1) as f64;
    Ok(GeneralizedVariance {
        per_class,
        mean,
        degenerate,
    })
}

/// `(1 − on/off)·100`; `None` when the unconstrained GV is zero.
pub fn gv_reduction_percent(gv_on: f64, gv_off: f64) -> Option<f64> {
    (gv_off > 0.0).then(|| (1.0 - gv_on / gv_off) * 100.0)
}

/// Determinant by Gaussian elimination with partial pivoting.
fn determinant(mut a: Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[[x, col]].abs().total_cmp(&a[[y, col]].abs()))
            .expect("non-empty range");
        if a[[pivot, col]] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for j in 0..n {
                a.swap([pivot, j], [col, j]);
            }
            det = -det;
        }
        let p = a[[col, col]];
        det *= p;
        for row in col + 1..n {
            let f = a[[row, col]] / p;
            for j in col..n {
                a[[row, j]] -= f * a[[col, j]];
            }
        }
    }
    det
}
