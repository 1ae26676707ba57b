use std::collections::VecDeque;

use super::Detector;
use crate::error::{DriftlabError, Result};

/// Relative frequencies of `values` in `bins` equal-width bins over `[lo, hi]`.
pub fn histogram(values: impl Iterator<Item = f64>, bins: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    let mut n = 0usize;
    let width = hi - lo;
    for v in values {
        let b = if width > 0.0 {
            (((v - lo) / width * bins as f64) as usize).min(bins - 1)
        } else {
            0
        };
        counts[b] += 1.0;
        n += 1;
    }
    if n > 0 {
        counts.iter_mut().for_each(|c| *c /= n as f64);
    }
    counts
}

/// Hellinger distance `sqrt(Σ (√p − √q)²)` between two histograms.
pub fn hellinger(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Hellinger distance detector over a sliding window.
///
/// The first `window` observations form the reference batch. The next
/// `window` observations fill the sliding window; once it is at least half
/// full, each step's distance seeds the threshold moments. Flags start after
/// both phases.
#[derive(Debug, Clone)]
pub struct Hdddm {
    dim: usize,
    window: usize,
    bins: usize,
    lambda: f64,
    reference: Vec<Vec<f64>>,
    recent: VecDeque<Vec<f64>>,
    seed_deltas: Vec<f64>,
    mu: f64,
    var: f64,
    beta: f64,
    warm: bool,
}

impl Hdddm {
    pub fn new(dim: usize, window: usize, bins: usize, lambda: f64) -> Result<Self> {
        if dim == 0 || window < 2 || bins < 2 {
            return Err(DriftlabError::InvalidArgument(
                "HDDDM needs dim >= 1, window >= 2 and bins >= 2".into(),
            ));
        }
        Ok(Hdddm {
            dim,
            window,
            bins,
            lambda,
            reference: Vec::with_capacity(window),
            recent: VecDeque::with_capacity(window),
            seed_deltas: Vec::new(),
            mu: 0.0,
            var: 0.0,
            beta: f64::INFINITY,
            warm: false,
        })
    }

    /// Number of observations consumed before the first flag can be raised.
    pub fn warmup_len(window: usize) -> usize {
        2 * window
    }

    pub fn threshold(&self) -> f64 {
        self.beta
    }

    /// Mean per-feature Hellinger distance between the reference batch and the window.
    pub fn delta(&self) -> f64 {
        let mut total = 0.0;
        for f in 0..self.dim {
            let all = self.reference.iter().chain(self.recent.iter()).map(|r| r[f]);
            let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
            let p = histogram(self.reference.iter().map(|r| r[f]), self.bins, lo, hi);
            let q = histogram(self.recent.iter().map(|r| r[f]), self.bins, lo, hi);
            total += hellinger(&p, &q);
        }
        total / self.dim as f64
    }
}

impl Detector for Hdddm {
    fn step(&mut self, x: &[f64]) -> Result<Option<bool>> {
        if x.len() != self.dim {
            return Err(DriftlabError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if self.reference.len() < self.window {
            self.reference.push(x.to_vec());
            return Ok(None);
        }
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(x.to_vec());
        let delta = self.delta();
        if !self.warm {
            if 2 * self.recent.len() >= self.window {
                self.seed_deltas.push(delta);
            }
            if self.recent.len() == self.window {
                let n = self.seed_deltas.len() as f64;
                self.mu = self.seed_deltas.iter().sum::<f64>() / n;
                self.var = self.seed_deltas.iter().map(|d| (d - self.mu).powi(2)).sum::<f64>() / n;
                self.beta = self.mu + self.var.sqrt();
                self.warm = true;
            }
            return Ok(None);
        }
        let flag = delta > self.beta;
        if !flag {
            let l = self.lambda;
            self.mu = l * self.mu + (1.0 - l) * delta;
            self.var = l * self.var + (1.0 - l) * (delta - self.mu).powi(2);
            self.beta = self.mu + self.var.sqrt();
        }
        Ok(Some(flag))
    }
}
