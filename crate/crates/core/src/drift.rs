//! Feature ranking by information gain and controlled drift injection.
//!
//! Injection works on the test region of an already normalized feature
//! matrix. Row indices in a [`DriftPlan`] are offsets into that region.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DriftKind};
use crate::error::{DriftlabError, Result};

/// Equal-width bins used to discretize a feature for information gain.
pub const IG_BINS: usize = 10;

/// Multiplicative noise spread reached at the end of the gradual ramp.
pub const GRADUAL_MAX_SIGMA: f64 = 2.0;

/// Features in descending information gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub order: Vec<usize>,
    /// Gain of each feature, indexed by feature (not by rank).
    pub gains: Vec<f64>,
}

impl FeatureRanking {
    /// Gains listed in rank order.
    pub fn ranked_gains(&self) -> Vec<f64> {
        self.order.iter().map(|&f| self.gains[f]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    Most,
    Least,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Most => "most",
            FeatureMode::Least => "least",
        }
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = DriftlabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "most" => Ok(FeatureMode::Most),
            "least" => Ok(FeatureMode::Least),
            other => Err(DriftlabError::InvalidArgument(format!(
                "unknown feature mode `{other}` (expected most or least)"
            ))),
        }
    }
}

fn entropy(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.ln()
        })
        .sum()
}

/// Bin index of every value under `bins` equal-width bins spanning the
/// column's own range. A constant column lands entirely in bin 0.
fn discretize(column: ArrayView1<f64>, bins: usize) -> Vec<usize> {
    let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    column
        .iter()
        .map(|&x| {
            if width > 0.0 {
                (((x - lo) / width).floor() as usize).min(bins - 1)
            } else {
                0
            }
        })
        .collect()
}

/// `H(Y) − H(Y | bin(x))` in nats.
pub fn information_gain(column: ArrayView1<f64>, labels: &[usize], k: usize) -> f64 {
    let n = labels.len();
    let bins = discretize(column, IG_BINS);
    let mut joint = vec![vec![0usize; k]; IG_BINS];
    let mut class = vec![0usize; k];
    for (&b, &y) in bins.iter().zip(labels) {
        joint[b][y] += 1;
        class[y] += 1;
    }
    let conditional: f64 = joint
        .iter()
        .map(|row| {
            let nb: usize = row.iter().sum();
            nb as f64 / n as f64 * entropy(row, nb)
        })
        .sum();
    (entropy(&class, n) - conditional).max(0.0)
}

/// Ranks every feature of `train` by information gain about the label.
///
/// Ties keep the lower feature index first.
pub fn rank_information_gain(train: &Dataset) -> Result<FeatureRanking> {
    if !train.categorical.is_empty() {
        return Err(DriftlabError::InvalidArgument(
            "categorical columns must be encoded before ranking".into(),
        ));
    }
    if train.features.iter().any(|x| !x.is_finite()) {
        return Err(DriftlabError::InvalidArgument(
            "non-finite feature value in ranking slice".into(),
        ));
    }
    let present = train.class_counts().iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(DriftlabError::InsufficientData(
            "information gain needs at least two classes".into(),
        ));
    }
    let gains: Vec<f64> = train
        .features
        .columns()
        .into_iter()
        .map(|col| information_gain(col, &train.labels, train.k))
        .collect();
    let mut order: Vec<usize> = (0..gains.len()).collect();
    // Stable sort keeps index order among equal gains.
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    Ok(FeatureRanking { order, gains })
}

/// Number of features corrupted out of `q`: a quarter, rounded, at least one.
pub fn subset_size(q: usize) -> usize {
    ((0.25 * q as f64).round() as usize).max(1)
}

pub fn select_subset(ranking: &FeatureRanking, mode: FeatureMode) -> Vec<usize> {
    let q = ranking.order.len();
    let count = subset_size(q).min(q);
    match mode {
        FeatureMode::Most => ranking.order[..count].to_vec(),
        FeatureMode::Least => ranking.order[q - count..].to_vec(),
    }
}

/// What to corrupt, where, and with which seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftPlan {
    pub kind: DriftKind,
    pub feature_mode: FeatureMode,
    pub feature_indices: Vec<usize>,
    pub onset: usize,
    pub ramp_end: usize,
    pub seed: u64,
}

impl DriftPlan {
    /// Checks the plan against a stream of `len` rows and `q` columns.
    pub fn validate(&self, len: usize, q: usize) -> Result<()> {
        if self.onset >= len {
            return Err(DriftlabError::InvalidArgument(format!(
                "drift onset {} outside stream of length {len}",
                self.onset
            )));
        }
        if self.kind == DriftKind::Gradual && (self.ramp_end <= self.onset || self.ramp_end > len) {
            return Err(DriftlabError::InvalidArgument(format!(
                "ramp end {} must lie in ({}, {len}]",
                self.ramp_end, self.onset
            )));
        }
        let mut seen = vec![false; q];
        for &f in &self.feature_indices {
            if f >= q || std::mem::replace(&mut seen[f], true) {
                return Err(DriftlabError::InvalidArgument(format!(
                    "feature index {f} is out of range or repeated"
                )));
            }
        }
        Ok(())
    }

    /// Rows whose selected cells may differ from the input.
    pub fn drifted_mask(&self, len: usize) -> Vec<bool> {
        let active = self.kind != DriftKind::None && !self.feature_indices.is_empty();
        (0..len).map(|t| active && t >= self.onset).collect()
    }

    /// Spread of the multiplicative noise at row `t`.
    pub fn gradual_sigma(&self, t: usize) -> f64 {
        if t < self.onset {
            return 0.0;
        }
        let frac = (t - self.onset) as f64 / (self.ramp_end - self.onset) as f64;
        GRADUAL_MAX_SIGMA * frac.min(1.0)
    }
}

/// Shuffles each selected column among its post-onset rows.
pub fn induce_step_drift(stream: ArrayView2<f64>, plan: &DriftPlan) -> Result<Array2<f64>> {
    if plan.kind != DriftKind::Step {
        return Err(DriftlabError::InvalidArgument("plan is not a step drift".into()));
    }
    plan.validate(stream.nrows(), stream.ncols())?;
    let mut out = stream.to_owned();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    for &f in &plan.feature_indices {
        let mut values: Vec<f64> = stream.column(f).iter().skip(plan.onset).copied().collect();
        values.shuffle(&mut rng);
        for (t, v) in (plan.onset..stream.nrows()).zip(values) {
            out[[t, f]] = v;
        }
    }
    Ok(out)
}

/// Multiplies selected post-onset cells by `η ~ N(1, σ(t)²)` with a linear
/// ramp in `σ`.
pub fn induce_gradual_drift(stream: ArrayView2<f64>, plan: &DriftPlan) -> Result<Array2<f64>> {
    if plan.kind != DriftKind::Gradual {
        return Err(DriftlabError::InvalidArgument("plan is not a gradual drift".into()));
    }
    plan.validate(stream.nrows(), stream.ncols())?;
    let mut out = stream.to_owned();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    for t in plan.onset..stream.nrows() {
        let sigma = plan.gradual_sigma(t);
        for &f in &plan.feature_indices {
            let z: f64 = StandardNormal.sample(&mut rng);
            out[[t, f]] *= 1.0 + sigma * z;
        }
    }
    Ok(out)
}

/// Applies `plan` according to its kind; `none` returns the stream unchanged.
pub fn induce_drift(stream: ArrayView2<f64>, plan: &DriftPlan) -> Result<Array2<f64>> {
    match plan.kind {
        DriftKind::None => Ok(stream.to_owned()),
        DriftKind::Step => induce_step_drift(stream, plan),
        DriftKind::Gradual => induce_gradual_drift(stream, plan),
    }
}

#[cfg(test)]
mod tests {
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::Rng;

    use super::*;

    fn dataset(features: Array2<f64>, labels: Vec<usize>, k: usize) -> Dataset {
        let names = (0..features.ncols()).map(|j| format!("f{j}")).collect();
        Dataset::new(features, labels, k, names).unwrap()
    }

    fn plan(kind: DriftKind, features: Vec<usize>, onset: usize, ramp_end: usize) -> DriftPlan {
        DriftPlan {
            kind,
            feature_mode: FeatureMode::Most,
            feature_indices: features,
            onset,
            ramp_end,
            seed: 3,
        }
    }

    fn random_stream(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn perfect_predictor_ranks_first() {
        let n = 400;
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_fn((n, 3), |(i, j)| match j {
            1 => labels[i] as f64,
            2 => 5.0,
            _ => rng.gen::<f64>(),
        });
        let r = rank_information_gain(&dataset(x, labels, 2)).unwrap();
        assert_eq!(r.order[0], 1);
        assert!((r.gains[1] - 2f64.ln()).abs() < 1e-12);
        assert_eq!(r.gains[2], 0.0);
        assert_eq!(r.order[2], 2);
    }

    #[test]
    fn independent_feature_has_near_zero_gain() {
        let n = 5000;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let x = Array2::from_shape_fn((n, 1), |_| rng.gen::<f64>());
        let r = rank_information_gain(&dataset(x, labels, 3)).unwrap();
        assert!(r.gains[0] < 0.02, "{}", r.gains[0]);
    }

    #[test]
    fn gain_matches_hand_count() {
        // Feature splits into bin 0 {y: 0,0,1} and bin 9 {y: 1}.
        let x = Array2::from_shape_vec((4, 1), vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let g = information_gain(x.column(0), &[0, 0, 1, 1], 2);
        let h = |p: f64| -(p * p.ln() + (1.0 - p) * (1.0 - p).ln());
        let expected = 2f64.ln() - 0.75 * h(1.0 / 3.0);
        assert!((g - expected).abs() < 1e-12);
    }

    #[test]
    fn ties_keep_index_order() {
        let x = Array2::from_elem((10, 4), 1.0);
        let labels = (0..10).map(|i| i % 2).collect();
        let r = rank_information_gain(&dataset(x, labels, 2)).unwrap();
        assert_eq!(r.order, vec![0, 1, 2, 3]);
    }

    #[test]
    fn single_class_is_an_error() {
        let x = Array2::zeros((10, 2));
        assert!(rank_information_gain(&dataset(x, vec![0; 10], 2)).is_err());
    }

    #[test]
    fn subset_sizes() {
        let ranking = |q: usize| FeatureRanking {
            order: (0..q).rev().collect(),
            gains: vec![0.0; q],
        };
        assert_eq!(select_subset(&ranking(20), FeatureMode::Most), vec![19, 18, 17, 16, 15]);
        assert_eq!(select_subset(&ranking(12), FeatureMode::Least), vec![2, 1, 0]);
        assert_eq!(select_subset(&ranking(2), FeatureMode::Most), vec![1]);
        assert_eq!(select_subset(&ranking(1), FeatureMode::Least), vec![0]);
    }

    #[test]
    fn step_drift_touches_only_selected_post_onset_cells() {
        let x = random_stream(200, 5, 4);
        let p = plan(DriftKind::Step, vec![1, 3], 100, 150);
        let y = induce_step_drift(x.view(), &p).unwrap();
        for ((t, f), v) in y.indexed_iter() {
            if t < 100 || !p.feature_indices.contains(&f) {
                assert_eq!(v.to_bits(), x[[t, f]].to_bits());
            }
        }
        for &f in &p.feature_indices {
            let mut a: Vec<f64> = x.column(f).iter().skip(100).copied().collect();
            let mut b: Vec<f64> = y.column(f).iter().skip(100).copied().collect();
            assert_ne!(a, b);
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b);
        }
        assert_eq!(y, induce_step_drift(x.view(), &p).unwrap());
    }

    #[test]
    fn step_drift_breaks_feature_label_link() {
        // Column equals the label before shuffling.
        let n = 2000;
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = Array2::from_shape_fn((n, 1), |(i, _)| labels[i] as f64);
        let y = induce_step_drift(x.view(), &plan(DriftKind::Step, vec![0], 0, 1)).unwrap();
        let mean_of = |c: usize| {
            let v: Vec<f64> = (0..n).filter(|&i| labels[i] == c).map(|i| y[[i, 0]]).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!((mean_of(0) - mean_of(1)).abs() < 0.1);
        assert_eq!(y.sum(), x.sum());
    }

    #[test]
    fn gradual_schedule() {
        let p = plan(DriftKind::Gradual, vec![0], 100, 200);
        assert_eq!(p.gradual_sigma(100), 0.0);
        assert_eq!(p.gradual_sigma(150), 1.0);
        assert_eq!(p.gradual_sigma(200), 2.0);
        assert_eq!(p.gradual_sigma(300), 2.0);
        let x = random_stream(300, 3, 5);
        let y = induce_gradual_drift(x.view(), &p).unwrap();
        assert_eq!(y[[100, 0]].to_bits(), x[[100, 0]].to_bits());
        assert_eq!(y.column(1), x.column(1));
        assert_eq!(y.column(2), x.column(2));
        assert_eq!(y.slice(ndarray::s![..100, ..]), x.slice(ndarray::s![..100, ..]));
    }

    #[test]
    fn gradual_noise_spread_grows() {
        let n = 20_000;
        let x = Array2::from_elem((n, 1), 1.0);
        let p = plan(DriftKind::Gradual, vec![0], 0, n / 2);
        let y = induce_gradual_drift(x.view(), &p).unwrap();
        // After the ramp the factor is N(1, 4).
        let tail: Vec<f64> = y.column(0).iter().skip(n / 2).copied().collect();
        let m = tail.iter().sum::<f64>() / tail.len() as f64;
        let var = tail.iter().map(|v| (v - m).powi(2)).sum::<f64>() / tail.len() as f64;
        assert!((m - 1.0).abs() < 0.1, "{m}");
        assert!((var - 4.0).abs() < 0.3, "{var}");
    }

    #[test]
    fn invalid_plans() {
        let x = random_stream(10, 2, 0);
        assert!(induce_step_drift(x.view(), &plan(DriftKind::Step, vec![0], 10, 10)).is_err());
        assert!(induce_step_drift(x.view(), &plan(DriftKind::Step, vec![2], 5, 10)).is_err());
        assert!(induce_step_drift(x.view(), &plan(DriftKind::Step, vec![0, 0], 5, 10)).is_err());
        assert!(induce_gradual_drift(x.view(), &plan(DriftKind::Gradual, vec![0], 5, 5)).is_err());
        assert!(induce_gradual_drift(x.view(), &plan(DriftKind::Step, vec![0], 5, 8)).is_err());
        assert_eq!(induce_drift(x.view(), &plan(DriftKind::None, vec![0], 5, 8)).unwrap(), x);
    }

    #[test]
    fn plan_json_roundtrip() {
        let p = plan(DriftKind::Gradual, vec![4, 1], 10, 20);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"gradual\"") && s.contains("\"most\""));
        assert_eq!(serde_json::from_str::<DriftPlan>(&s).unwrap(), p);
    }

    proptest! {
        #[test]
        fn gains_bounded_and_sorted(
            rows in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0usize..3), 2..200)
        ) {
            let n = rows.len();
            let mut labels: Vec<usize> = rows.iter().map(|r| r.2).collect();
            labels[0] = 0;
            labels[1] = 1;
            let x = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { rows[i].0 } else { rows[i].1 });
            let ds = dataset(x, labels.clone(), 3);
            let r = rank_information_gain(&ds).unwrap();
            let mut counts = [0usize; 3];
            for &y in &labels {
                counts[y] += 1;
            }
            let hy = entropy(&counts, n);
            for &g in &r.gains {
                prop_assert!((0.0..=hy + 1e-12).contains(&g));
            }
            let ranked = r.ranked_gains();
            prop_assert!(ranked.windows(2).all(|w| w[0] >= w[1]));
            let mut sorted = r.order.clone();
            sorted.sort();
            prop_assert_eq!(sorted, vec![0, 1]);
        }

        #[test]
        fn step_preserves_post_onset_moments(
            seed in any::<u64>(),
            onset in 0usize..60,
            cols in proptest::collection::btree_set(0usize..4, 1..4),
        ) {
            let x = random_stream(60, 4, seed);
            let mut p = plan(DriftKind::Step, cols.into_iter().collect(), onset.min(59), 60);
            p.seed = seed;
            let y = induce_step_drift(x.view(), &p).unwrap();
            for f in 0..4 {
                let a: Vec<f64> = x.column(f).iter().skip(p.onset).copied().collect();
                let mut b: Vec<f64> = y.column(f).iter().skip(p.onset).copied().collect();
                let mut a_sorted = a.clone();
                a_sorted.sort_by(f64::total_cmp);
                b.sort_by(f64::total_cmp);
                prop_assert_eq!(a_sorted, b);
            }
            for t in 0..p.onset {
                prop_assert_eq!(x.row(t), y.row(t));
            }
        }

        #[test]
        fn gradual_touches_only_selected_post_onset_cells(
            seed in any::<u64>(),
            onset in 0usize..50,
            span in 1usize..30,
            cols in proptest::collection::btree_set(0usize..4, 0..4),
        ) {
            let x = random_stream(80, 4, seed);
            let mut p = plan(DriftKind::Gradual, cols.into_iter().collect(), onset, onset + span);
            p.seed = seed;
            let y = induce_gradual_drift(x.view(), &p).unwrap();
            for ((t, f), v) in y.indexed_iter() {
                if t <= onset || !p.feature_indices.contains(&f) {
                    prop_assert_eq!(v.to_bits(), x[[t, f]].to_bits());
                }
            }
        }
    }
}
