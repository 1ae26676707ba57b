use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DataSplits, Dataset};
use crate::error::{DriftlabError, Result};

/// Half-width of the box centroids are sampled from: `[-3, 3]^d`.
pub const CENTROID_BOX: f64 = 3.0;

const COVERAGE_ATTEMPTS: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftKind {
    None,
    Step,
    Gradual,
}

impl DriftKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DriftKind::None => "none",
            DriftKind::Step => "step",
            DriftKind::Gradual => "gradual",
        }
    }
}

impl std::str::FromStr for DriftKind {
    type Err = DriftlabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DriftKind::None),
            "step" => Ok(DriftKind::Step),
            "gradual" => Ok(DriftKind::Gradual),
            other => Err(DriftlabError::InvalidArgument(format!(
                "unknown drift kind `{other}` (expected none, step or gradual)"
            ))),
        }
    }
}

/// Parameters of a Gaussian-blob classification stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub informative_dims: usize,
    pub redundant_dims: usize,
    pub noise_dims: usize,
    pub k: usize,
    pub cluster_std: f64,
    pub drift_kind: DriftKind,
    pub seed: u64,
}

impl SyntheticSpec {
    /// 10000 samples, 10 informative + 5 redundant + 5 noise features, 4 classes.
    pub fn rbf(seed: u64) -> Self {
        SyntheticSpec {
            n: 10_000,
            informative_dims: 10,
            redundant_dims: 5,
            noise_dims: 5,
            k: 4,
            cluster_std: 1.0,
            drift_kind: DriftKind::None,
            seed,
        }
    }

    /// 10000 samples, 10 informative features, 4 classes with moving centroids.
    pub fn moving_rbf(drift_kind: DriftKind, seed: u64) -> Self {
        SyntheticSpec {
            n: 10_000,
            informative_dims: 10,
            redundant_dims: 0,
            noise_dims: 0,
            k: 4,
            cluster_std: 1.0,
            drift_kind,
            seed,
        }
    }

    pub fn q(&self) -> usize {
        self.informative_dims + self.redundant_dims + self.noise_dims
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.informative_dims == 0 || self.k == 0 {
            return Err(DriftlabError::InvalidArgument(
                "synthetic spec needs positive n, informative_dims and k".into(),
            ));
        }
        if !(self.cluster_std > 0.0 && self.cluster_std.is_finite()) {
            return Err(DriftlabError::InvalidArgument(
                "cluster_std must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn attempt_seed(seed: u64, attempt: u64) -> u64 {
    seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn sample_centroids(rng: &mut ChaCha8Rng, k: usize, dims: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((k, dims), || rng.gen_range(-CENTROID_BOX..=CENTROID_BOX))
}

fn train_prefix_covers(labels: &[usize], k: usize) -> bool {
    let mut seen = vec![false; k];
    for &y in &labels[..labels.len() / 2] {
        seen[y] = true;
    }
    seen.into_iter().all(|s| s)
}

fn with_coverage<T>(
    spec: &SyntheticSpec,
    mut build: impl FnMut(u64) -> (Dataset, T),
) -> Result<(Dataset, T)> {
    for attempt in 0..COVERAGE_ATTEMPTS {
        let (ds, extra) = build(attempt_seed(spec.seed, attempt));
        if train_prefix_covers(&ds.labels, spec.k) {
            return Ok((ds, extra));
        }
    }
    Err(DriftlabError::InsufficientData(format!(
        "some class missing from the training half after {COVERAGE_ATTEMPTS} seeds"
    )))
}

/// Static Gaussian blobs with redundant copies and white-noise columns.
///
/// Columns are ordered informative, redundant, noise. Redundant column `j`
/// is an exact copy of informative column `sources[j]`.
pub fn generate_rbf(spec: &SyntheticSpec) -> Result<(Dataset, Vec<usize>)> {
    spec.validate()?;
    with_coverage(spec, |seed| build_rbf(spec, seed))
}

fn build_rbf(spec: &SyntheticSpec, seed: u64) -> (Dataset, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inf = spec.informative_dims;
    let centroids = sample_centroids(&mut rng, spec.k, inf);
    let sources: Vec<usize> = (0..spec.redundant_dims)
        .map(|_| rng.gen_range(0..inf))
        .collect();

    let mut features = Array2::zeros((spec.n, spec.q()));
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let y = rng.gen_range(0..spec.k);
        labels.push(y);
        for d in 0..inf {
            let z: f64 = rng.sample(StandardNormal);
            features[[i, d]] = centroids[[y, d]] + spec.cluster_std * z;
        }
        for (j, &src) in sources.iter().enumerate() {
            features[[i, inf + j]] = features[[i, src]];
        }
        for j in 0..spec.noise_dims {
            features[[i, inf + spec.redundant_dims + j]] = rng.sample(StandardNormal);
        }
    }

    let names = (0..inf)
        .map(|d| format!("inf{d}"))
        .chain((0..spec.redundant_dims).map(|d| format!("red{d}")))
        .chain((0..spec.noise_dims).map(|d| format!("noise{d}")))
        .collect();
    let ds = Dataset::new(features, labels, spec.k, names).expect("generator output is valid");
    (ds, sources)
}

/// Where the class centroids of a moving-blob stream start, end, and when.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingRbfMeta {
    pub kind: DriftKind,
    pub initial_centroids: Vec<Vec<f64>>,
    pub final_centroids: Vec<Vec<f64>>,
    /// Onset as a fraction of the whole stream.
    pub onset_fraction: f64,
    pub onset_index: usize,
    /// First stream index generated fully from the final centroids (gradual).
    pub ramp_end_index: usize,
}

impl MovingRbfMeta {
    /// Generating centroid of `class` for the sample at stream `index`.
    pub fn centroid_at(&self, index: usize, class: usize) -> Vec<f64> {
        let init = &self.initial_centroids[class];
        let fin = &self.final_centroids[class];
        let weight = match self.kind {
            DriftKind::None => 0.0,
            DriftKind::Step => {
                if index >= self.onset_index {
                    1.0
                } else {
                    0.0
                }
            }
            DriftKind::Gradual => {
                if index <= self.onset_index {
                    0.0
                } else if index >= self.ramp_end_index {
                    1.0
                } else {
                    (index - self.onset_index) as f64
                        / (self.ramp_end_index - self.onset_index) as f64
                }
            }
        };
        init.iter()
            .zip(fin)
            .map(|(a, b)| (1.0 - weight) * a + weight * b)
            .collect()
    }
}

/// Gaussian blobs whose centroids move to freshly sampled locations after the
/// drift onset (midpoint of the test half), either at once or linearly over
/// the following quarter of the test half.
///
/// Labels and noise are drawn identically for every drift kind, so all
/// variants share the same pre-onset samples for a given seed.
pub fn generate_moving_rbf(spec: &SyntheticSpec) -> Result<(Dataset, MovingRbfMeta)> {
    spec.validate()?;
    if spec.redundant_dims != 0 || spec.noise_dims != 0 {
        return Err(DriftlabError::InvalidArgument(
            "moving RBF streams only have informative features".into(),
        ));
    }
    DataSplits::for_len(spec.n)?;
    with_coverage(spec, |seed| build_moving_rbf(spec, seed))
}

fn rows_to_vecs(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r: ArrayView1<f64>| r.to_vec()).collect()
}

fn build_moving_rbf(spec: &SyntheticSpec, seed: u64) -> (Dataset, MovingRbfMeta) {
    let splits = DataSplits::for_len(spec.n).expect("validated length");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = spec.informative_dims;
    let initial = sample_centroids(&mut rng, spec.k, dims);
    let mut fin = sample_centroids(&mut rng, spec.k, dims);
    if spec.drift_kind == DriftKind::None {
        fin.assign(&initial);
    }
    let onset = splits.test.start + splits.drift_onset;
    let meta = MovingRbfMeta {
        kind: spec.drift_kind,
        initial_centroids: rows_to_vecs(&initial),
        final_centroids: rows_to_vecs(&fin),
        onset_fraction: onset as f64 / spec.n as f64,
        onset_index: onset,
        ramp_end_index: splits.test.start + splits.ramp_end(),
    };

    let mut features = Array2::zeros((spec.n, dims));
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let y = rng.gen_range(0..spec.k);
        labels.push(y);
        let center = meta.centroid_at(i, y);
        for d in 0..dims {
            let z: f64 = rng.sample(StandardNormal);
            features[[i, d]] = center[d] + spec.cluster_std * z;
        }
    }
    let names = (0..dims).map(|d| format!("x{d}")).collect();
    let ds = Dataset::new(features, labels, spec.k, names).expect("generator output is valid");
    (ds, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rbf_preset_shape() {
        let (ds, sources) = generate_rbf(&SyntheticSpec::rbf(3)).unwrap();
        assert_eq!((ds.n(), ds.q(), ds.k), (10_000, 20, 4));
        for (j, &src) in sources.iter().enumerate() {
            assert_eq!(ds.features.column(10 + j), ds.features.column(src));
        }
    }

    #[test]
    fn rbf_class_means_near_centroids() {
        let spec = SyntheticSpec::rbf(11);
        let (ds, _) = generate_rbf(&spec).unwrap();
        // Replay the generator's first draws to recover the centroids.
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let centroids = sample_centroids(&mut rng, spec.k, spec.informative_dims);
        for class in 0..spec.k {
            let rows: Vec<usize> = (0..ds.n()).filter(|&i| ds.labels[i] == class).collect();
            let bound = 5.0 / (rows.len() as f64).sqrt();
            for d in 0..spec.informative_dims {
                let mean = rows.iter().map(|&i| ds.features[[i, d]]).sum::<f64>() / rows.len() as f64;
                assert!(
                    (mean - centroids[[class, d]]).abs() < bound,
                    "class {class} dim {d}: {mean} vs {}",
                    centroids[[class, d]]
                );
            }
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let a = generate_rbf(&SyntheticSpec::rbf(5)).unwrap();
        let b = generate_rbf(&SyntheticSpec::rbf(5)).unwrap();
        assert_eq!(a, b);
        let c = generate_moving_rbf(&SyntheticSpec::moving_rbf(DriftKind::Gradual, 5)).unwrap();
        let d = generate_moving_rbf(&SyntheticSpec::moving_rbf(DriftKind::Gradual, 5)).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn moving_rbf_preset_shape_and_onset() {
        let (ds, meta) = generate_moving_rbf(&SyntheticSpec::moving_rbf(DriftKind::Step, 1)).unwrap();
        assert_eq!((ds.n(), ds.q(), ds.k), (10_000, 10, 4));
        assert_eq!(meta.onset_index, 7_500);
        assert_eq!(meta.ramp_end_index, 8_750);
        assert!((meta.onset_fraction - 0.75).abs() < 1e-12);
        assert_eq!(meta.centroid_at(7_500, 2), meta.final_centroids[2]);
        assert_eq!(meta.centroid_at(7_499, 2), meta.initial_centroids[2]);
    }

    #[test]
    fn gradual_midpoint_is_average() {
        let (_, meta) =
            generate_moving_rbf(&SyntheticSpec::moving_rbf(DriftKind::Gradual, 2)).unwrap();
        let mid = (meta.onset_index + meta.ramp_end_index) / 2;
        let c = meta.centroid_at(mid, 1);
        for d in 0..c.len() {
            let expect = 0.5 * (meta.initial_centroids[1][d] + meta.final_centroids[1][d]);
            assert!((c[d] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn drift_kinds_share_pre_onset_samples() {
        let (step, meta) = generate_moving_rbf(&SyntheticSpec::moving_rbf(DriftKind::Step, 9)).unwrap();
        let (grad, _) = generate_moving_rbf(&SyntheticSpec::moving_rbf(DriftKind::Gradual, 9)).unwrap();
        let (none, _) = generate_moving_rbf(&SyntheticSpec::moving_rbf(DriftKind::None, 9)).unwrap();
        let pre = meta.onset_index;
        assert_eq!(step.slice(0..pre), grad.slice(0..pre));
        assert_eq!(step.slice(0..pre), none.slice(0..pre));
        assert_ne!(step.slice(pre..step.n()), none.slice(pre..none.n()));
    }

    #[test]
    fn rejects_non_positive_counts() {
        let mut spec = SyntheticSpec::rbf(0);
        spec.k = 0;
        assert!(generate_rbf(&spec).is_err());
        let mut spec = SyntheticSpec::moving_rbf(DriftKind::Step, 0);
        spec.informative_dims = 0;
        assert!(generate_moving_rbf(&spec).is_err());
    }
}
