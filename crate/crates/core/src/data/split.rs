use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{DriftlabError, Result};

/// Smallest dataset for which every split region is non-empty.
pub const MIN_SPLIT_SAMPLES: usize = 8;

/// Train/test/reference layout over a (possibly permuted) dataset.
///
/// `train` is the first half, `test` the second. `reference` is the first
/// quarter of `test`, and `drift_onset` is an offset into `test` at its
/// midpoint. Every boundary uses floor division.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplits {
    pub train: Range<usize>,
    pub test: Range<usize>,
    pub reference: Range<usize>,
    pub drift_onset: usize,
}

impl DataSplits {
    pub fn for_len(n: usize) -> Result<Self> {
        if n < MIN_SPLIT_SAMPLES {
            return Err(DriftlabError::DatasetTooSmall {
                found: n,
                needed: MIN_SPLIT_SAMPLES,
            });
        }
        let half = n / 2;
        let test_len = n - half;
        let ref_len = test_len / 4;
        Ok(DataSplits {
            train: 0..half,
            test: half..n,
            reference: half..half + ref_len,
            drift_onset: test_len / 2,
        })
    }

    pub fn test_len(&self) -> usize {
        self.test.len()
    }

    /// Offset into `test` where gradual drift reaches full strength.
    pub fn ramp_end(&self) -> usize {
        self.test_len() * 3 / 4
    }

    /// Rows held out of SGD for validation: the last 20% of `train`.
    pub fn validation(&self) -> Range<usize> {
        let val = self.train.len() / 5;
        self.train.end - val..self.train.end
    }

    /// Rows used for gradient updates.
    pub fn fit(&self) -> Range<usize> {
        self.train.start..self.validation().start
    }

    /// Test offsets that the detector actually observes.
    pub fn monitored(&self) -> Range<usize> {
        self.reference.len()..self.test_len()
    }

    /// Drift onset measured from the first monitored sample.
    pub fn monitored_onset(&self) -> usize {
        self.drift_onset - self.reference.len()
    }
}

/// Splits a stream that must keep its generation order.
pub fn in_order_split(n: usize) -> Result<DataSplits> {
    DataSplits::for_len(n)
}

/// Applies a seeded random permutation and returns the split layout.
pub fn shuffle_split(ds: &Dataset, seed: u64) -> Result<(Dataset, DataSplits)> {
    let splits = DataSplits::for_len(ds.n())?;
    let mut order: Vec<usize> = (0..ds.n()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((ds.select_rows(&order), splits))
}
