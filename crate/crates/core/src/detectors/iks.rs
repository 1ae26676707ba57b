use std::collections::VecDeque;

use super::Detector;
use crate::error::{DriftlabError, Result};

/// Asymptotic two-sample KS coefficient `c(α)`; tabulated at the usual levels.
pub fn ks_critical_coefficient(alpha: f64) -> f64 {
    if alpha == 0.01 {
        1.628
    } else if alpha == 0.05 {
        1.358
    } else {
        (-(alpha / 2.0).ln() / 2.0).sqrt()
    }
}

/// Rejection threshold on `D` for samples of size `n` and `m`.
pub fn ks_threshold(alpha: f64, n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_critical_coefficient(alpha) * ((n + m) / (n * m)).sqrt()
}

/// Two-sample KS statistic of two sorted samples.
///
/// The supremum is taken over integer numerators `|c_a·n_b − c_b·n_a|` so the
/// value is independent of how the ECDFs are traversed.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (na, nb) = (a.len() as i64, b.len() as i64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = 0i64;
    while i < a.len() || j < b.len() {
        let v = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        best = best.max((i as i64 * nb - j as i64 * na).abs());
    }
    best as f64 / (na * nb) as f64
}

#[derive(Debug, Clone)]
struct SortedWindow {
    capacity: usize,
    order: VecDeque<Vec<f64>>,
    sorted: Vec<Vec<f64>>,
}

impl SortedWindow {
    fn new(dim: usize, capacity: usize) -> Self {
        SortedWindow {
            capacity,
            order: VecDeque::with_capacity(capacity),
            sorted: vec![Vec::with_capacity(capacity); dim],
        }
    }

    fn len(&self) -> usize {
        self.order.len()
    }

    /// Appends `x`, returning the evicted oldest row when the window was full.
    fn push(&mut self, x: &[f64]) -> Option<Vec<f64>> {
        let evicted = if self.order.len() == self.capacity {
            let old = self.order.pop_front().expect("full window");
            for (col, v) in self.sorted.iter_mut().zip(&old) {
                let pos = col.partition_point(|e| e.total_cmp(v).is_lt());
                col.remove(pos);
            }
            Some(old)
        } else {
            None
        };
        for (col, &v) in self.sorted.iter_mut().zip(x) {
            let pos = col.partition_point(|e| e.total_cmp(&v).is_le());
            col.insert(pos, v);
        }
        self.order.push_back(x.to_vec());
        evicted
    }
}

/// Incremental per-feature KS test of a sliding window against a reference window.
///
/// A sample that leaves the sliding window unflagged moves into the reference
/// window, so the two windows stay adjacent and disjoint.
#[derive(Debug, Clone)]
pub struct Iks {
    dim: usize,
    alpha: f64,
    reference: SortedWindow,
    test: SortedWindow,
    /// Flag of each sample in the sliding window, oldest first.
    test_flags: VecDeque<bool>,
}

impl Iks {
    /// `reference` rows beyond `window` are dropped oldest-first.
    pub fn new<'a>(
        reference: impl IntoIterator<Item = &'a [f64]>,
        dim: usize,
        window: usize,
        alpha: f64,
    ) -> Result<Self> {
        let mut r = SortedWindow::new(dim, window);
        for row in reference {
            if row.len() != dim {
                return Err(DriftlabError::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            r.push(row);
        }
        if r.len() == 0 {
            return Err(DriftlabError::InsufficientData("IKS needs reference samples".into()));
        }
        Ok(Iks {
            dim,
            alpha,
            reference: r,
            test: SortedWindow::new(dim, window),
            test_flags: VecDeque::with_capacity(window),
        })
    }

    pub fn is_warm(&self) -> bool {
        self.test.len() == self.test.capacity
    }

    /// Current KS statistic per feature.
    pub fn statistics(&self) -> Vec<f64> {
        self.reference
            .sorted
            .iter()
            .zip(&self.test.sorted)
            .map(|(a, b)| ks_statistic(a, b))
            .collect()
    }

    pub fn threshold(&self) -> f64 {
        ks_threshold(self.alpha, self.reference.len(), self.test.len())
    }

    /// Reference and test windows as (oldest-first) rows, for inspection.
    pub fn windows(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (
            self.reference.order.iter().cloned().collect(),
            self.test.order.iter().cloned().collect(),
        )
    }
}

impl Detector for Iks {
    fn step(&mut self, x: &[f64]) -> Result<Option<bool>> {
        if x.len() != self.dim {
            return Err(DriftlabError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if let Some(old) = self.test.push(x) {
            if !self.test_flags.pop_front().unwrap_or(false) {
                self.reference.push(&old);
            }
        }
        if !self.is_warm() {
            self.test_flags.push_back(false);
            return Ok(None);
        }
        let t = self.threshold();
        let flag = self.statistics().into_iter().any(|d| d > t);
        self.test_flags.push_back(flag);
        Ok(Some(flag))
    }
}
