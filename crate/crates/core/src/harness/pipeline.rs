use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::config::{DatasetSource, DriftSetting, Preset};
use crate::data::{
    encode_and_normalize, generate_moving_rbf, generate_rbf, in_order_split, load_csv, shuffle_split,
    DataSplits, Dataset, DriftKind, NormStats, SyntheticSpec,
};
use crate::detectors::{run_prepared, DetectorConfig, DetectorKind, PreparedStream, RunResult};
use crate::drift::{induce_drift, rank_information_gain, select_subset, DriftPlan, FeatureRanking};
use crate::error::{DriftlabError, Result};
use crate::eval::{classify_drift_type, DriftLabel};
use crate::neural::{compute_centroids_posthoc, evaluate_accuracy, train, Model, TrainConfig};

/// A normalized dataset laid out for one seed.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub dataset: Dataset,
    pub splits: DataSplits,
    pub norm: NormStats,
    /// Features ranked on the training half; absent when drift is built into the data.
    pub ranking: Option<FeatureRanking>,
    /// Onset as an offset into the test half.
    pub onset: usize,
}

/// Loads or generates the data for `seed` and normalizes it with training-half statistics.
///
/// Synthetic moving-blob streams keep their order and carry their own drift
/// of kind `variant`. Everything else is shuffled with `seed`.
pub fn prepare_data(
    source: &DatasetSource,
    variant: DriftKind,
    seed: u64,
    loaded: Option<&Dataset>,
) -> Result<PreparedData> {
    let (raw, splits, onset) = match source {
        DatasetSource::Preset(Preset::MovingRbf) => {
            let (ds, meta) = generate_moving_rbf(&SyntheticSpec::moving_rbf(variant, seed))?;
            let splits = in_order_split(ds.n())?;
            let onset = meta.onset_index - splits.test.start;
            (ds, splits, onset)
        }
        DatasetSource::Preset(Preset::Rbf) => {
            let (ds, _) = generate_rbf(&SyntheticSpec::rbf(seed))?;
            let (ds, splits) = shuffle_split(&ds, seed)?;
            let onset = splits.drift_onset;
            (ds, splits, onset)
        }
        DatasetSource::Csv { path, label_column } => {
            let owned;
            let ds = match loaded {
                Some(ds) => ds,
                None => {
                    owned = load_csv(path, label_column)?;
                    &owned
                }
            };
            let (ds, splits) = shuffle_split(ds, seed)?;
            let onset = splits.drift_onset;
            (ds, splits, onset)
        }
    };
    let (_, norm) = encode_and_normalize(&raw.slice(splits.train.clone()), None)?;
    let (dataset, _) = encode_and_normalize(&raw, Some(&norm))?;
    let ranking = if source.intrinsic_drift() {
        None
    } else {
        Some(rank_information_gain(&dataset.slice(splits.train.clone()))?)
    };
    Ok(PreparedData {
        dataset,
        splits,
        norm,
        ranking,
        onset,
    })
}

/// A trained model plus its in-distribution accuracies.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: Model,
    pub acc_train: f64,
    pub acc_valid: f64,
}

/// Trains on the training half; unconstrained models get centroids from class means.
pub fn train_model(data: &PreparedData, cfg: &TrainConfig, constrained: bool) -> Result<TrainedModel> {
    let out = train(&data.dataset, &data.splits, cfg, constrained)?;
    let fit = data.dataset.slice(data.splits.fit());
    let valid = data.dataset.slice(data.splits.validation());
    let centroids = match out.centroids {
        Some(c) => c,
        None => compute_centroids_posthoc(&out.params, &fit)?,
    };
    let acc_train = evaluate_accuracy(&out.params, &fit)?;
    let acc_valid = evaluate_accuracy(&out.params, &valid)?;
    Ok(TrainedModel {
        model: Model {
            params: out.params,
            centroids,
            norm: Some(data.norm.clone()),
            config: cfg.clone(),
            constrained,
        },
        acc_train,
        acc_valid,
    })
}

/// The test half after drift injection, split into reference and monitored parts.
#[derive(Debug, Clone)]
pub struct DriftedStream {
    pub reference: Array2<f64>,
    pub monitored: Array2<f64>,
    pub monitored_labels: Vec<usize>,
    /// Onset relative to the first monitored sample.
    pub onset: usize,
    pub plan: Option<DriftPlan>,
}

impl DriftedStream {
    pub fn post_onset(&self) -> (Array2<f64>, Vec<usize>) {
        (
            self.monitored.slice(s![self.onset.., ..]).to_owned(),
            self.monitored_labels[self.onset..].to_vec(),
        )
    }
}

/// Applies `setting` to the test half of `data`.
pub fn build_stream(data: &PreparedData, setting: &DriftSetting, seed: u64) -> Result<DriftedStream> {
    let test = data.dataset.slice(data.splits.test.clone());
    let ref_len = data.splits.reference.len();
    if data.onset <= ref_len || data.onset >= test.n() {
        return Err(DriftlabError::InsufficientData(format!(
            "drift onset {} leaves no monitored samples on one side",
            data.onset
        )));
    }
    let plan = match (setting.feature_mode, &data.ranking) {
        (Some(mode), Some(ranking)) if setting.kind != DriftKind::None => Some(DriftPlan {
            kind: setting.kind,
            feature_mode: mode,
            feature_indices: select_subset(ranking, mode),
            onset: data.onset,
            ramp_end: data.splits.ramp_end(),
            seed,
        }),
        _ => None,
    };
    let features = match &plan {
        Some(p) => induce_drift(test.features.view(), p)?,
        None => test.features,
    };
    Ok(DriftedStream {
        reference: features.slice(s![..ref_len, ..]).to_owned(),
        monitored: features.slice(s![ref_len.., ..]).to_owned(),
        monitored_labels: test.labels[ref_len..].to_vec(),
        onset: data.onset - ref_len,
        plan,
    })
}

/// Accuracy on the post-onset part of the stream and the resulting label.
pub fn label_stream(trained: &TrainedModel, stream: &DriftedStream, k: usize) -> Result<DriftLabel> {
    let (x, y) = stream.post_onset();
    let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
    let post = Dataset::new(x, y, k, names)?;
    let acc_test = evaluate_accuracy(&trained.model.params, &post)?;
    Ok(classify_drift_type(trained.acc_train, trained.acc_valid, acc_test))
}

/// Detector output on one stream, or the reason it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorOutcome {
    pub detector: DetectorKind,
    pub result: std::result::Result<RunResult, String>,
}

/// Embeds the stream once and runs every detector on it.
pub fn run_detectors(
    model: &Model,
    stream: &DriftedStream,
    detectors: &[DetectorKind],
    cfg: &DetectorConfig,
) -> Result<Vec<DetectorOutcome>> {
    let prepared = PreparedStream::new(
        Some((&model.params, &model.centroids)),
        stream.reference.view(),
        stream.monitored.view(),
        stream.onset,
    )?;
    Ok(detectors
        .iter()
        .map(|&kind| DetectorOutcome {
            detector: kind,
            result: run_prepared(kind, &prepared, cfg).map_err(|e| e.to_string()),
        })
        .collect())
}
