use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{
    Detector, DetectorConfig, DetectorKind, Emad, Hdddm, Iks, WindowedDecision, Zsd, ZsdUpdate,
};
use crate::embedding_stats::{distances, reference_from_features, FeatureLayout, FeatureVector};
use crate::error::{DriftlabError, Result};
use crate::neural::{Centroids, MlpParams};

/// Detection record of one stream. Indices count from the first monitored sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub detector: DetectorKind,
    pub raw_flags: Vec<bool>,
    /// Samples consumed while the detector was warming up (flag forced to 0).
    pub warmup: Vec<bool>,
    pub report_index: Option<usize>,
    pub onset_index: usize,
    pub delay: Option<usize>,
    pub stopped_early: bool,
    pub stream_len: usize,
}

/// A monitored stream with the representations every detector may ask for.
pub struct PreparedStream {
    raw_monitored: Array2<f64>,
    embedded: Option<Embedded>,
    onset: usize,
}

struct Embedded {
    reference: Array2<f64>,
    monitored: Array2<f64>,
    centroids: Centroids,
}

impl PreparedStream {
    /// Embeds `reference` and `monitored` once so several detectors can share the work.
    pub fn new(
        model: Option<(&MlpParams, &Centroids)>,
        reference: ArrayView2<f64>,
        monitored: ArrayView2<f64>,
        onset: usize,
    ) -> Result<Self> {
        if monitored.nrows() == 0 {
            return Err(DriftlabError::InsufficientData("empty monitored stream".into()));
        }
        if onset > monitored.nrows() {
            return Err(DriftlabError::InvalidArgument(format!(
                "drift onset {onset} beyond stream of length {}",
                monitored.nrows()
            )));
        }
        let embedded = match model {
            Some((params, centroids)) => {
                if reference.nrows() == 0 {
                    return Err(DriftlabError::InsufficientData("empty reference slice".into()));
                }
                Some(Embedded {
                    reference: params.predict(reference)?.0,
                    monitored: params.predict(monitored)?.0,
                    centroids: centroids.clone(),
                })
            }
            None => None,
        };
        Ok(PreparedStream {
            raw_monitored: monitored.to_owned(),
            embedded,
            onset,
        })
    }

    pub fn len(&self) -> usize {
        self.raw_monitored.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn onset(&self) -> usize {
        self.onset
    }

    fn embedded(&self, kind: DetectorKind) -> Result<&Embedded> {
        self.embedded.as_ref().ok_or_else(|| {
            DriftlabError::InvalidArgument(format!("detector `{kind}` needs a trained model"))
        })
    }
}

fn features(emb: &Array2<f64>, c: &Centroids, layout: FeatureLayout) -> Result<Vec<FeatureVector>> {
    emb.axis_iter(Axis(0))
        .map(|e| layout.extract(&distances(e, c)))
        .collect()
}

/// Runs one detector over the prepared stream and stops at the first report.
pub fn run_prepared(kind: DetectorKind, stream: &PreparedStream, cfg: &DetectorConfig) -> Result<RunResult> {
    cfg.validate()?;
    let window = cfg.baseline_window();
    let (mut detector, inputs): (Box<dyn Detector>, Vec<Vec<f64>>) = match kind {
        DetectorKind::Zsd | DetectorKind::Emad => {
            let e = stream.embedded(kind)?;
            let reference = reference_from_features(
                &features(&e.reference, &e.centroids, FeatureLayout::ScalarMin)?,
                None,
            )?;
            let (mu, sigma) = (reference.mean()[0], reference.std()[0]);
            let det: Box<dyn Detector> = match (kind, cfg.zsd_update) {
                (DetectorKind::Zsd, ZsdUpdate::ReferenceWindow) => {
                    Box::new(Zsd::with_reference(reference, cfg.alpha_zsd)?)
                }
                (DetectorKind::Zsd, ZsdUpdate::Ema) => {
                    Box::new(Zsd::with_ema(mu, sigma, cfg.lambda, cfg.alpha_zsd)?)
                }
                _ => Box::new(Emad::new(mu, sigma, cfg.lambda)?),
            };
            let inputs = features(&e.monitored, &e.centroids, FeatureLayout::ScalarMin)?;
            (det, inputs.into_iter().map(|f| f.values).collect())
        }
        DetectorKind::Iks => {
            let e = stream.embedded(kind)?;
            let reference = features(&e.reference, &e.centroids, FeatureLayout::Summary4)?;
            let det = Iks::new(
                reference.iter().map(|f| f.values.as_slice()),
                FeatureLayout::Summary4.width(),
                window,
                cfg.alpha_iks,
            )?;
            let inputs = features(&e.monitored, &e.centroids, FeatureLayout::Summary4)?;
            (Box::new(det), inputs.into_iter().map(|f| f.values).collect())
        }
        DetectorKind::HdddmE => {
            let e = stream.embedded(kind)?;
            let det = Hdddm::new(e.monitored.ncols(), window, cfg.hdddm_bins(), cfg.lambda)?;
            (Box::new(det), e.monitored.rows().into_iter().map(|r| r.to_vec()).collect())
        }
        DetectorKind::HdddmI => {
            let raw = &stream.raw_monitored;
            let det = Hdddm::new(raw.ncols(), window, cfg.hdddm_bins(), cfg.lambda)?;
            (Box::new(det), raw.rows().into_iter().map(|r| r.to_vec()).collect())
        }
    };

    let mut decision = WindowedDecision::new(cfg.w, cfg.r);
    let mut raw_flags = Vec::with_capacity(inputs.len());
    let mut warmup = Vec::with_capacity(inputs.len());
    let mut report_index = None;
    for (i, x) in inputs.iter().enumerate() {
        let out = detector.step(x)?;
        let flag = out.unwrap_or(false);
        raw_flags.push(flag);
        warmup.push(out.is_none());
        if decision.push(flag) {
            report_index = Some(i);
            break;
        }
    }
    let onset = stream.onset;
    Ok(RunResult {
        detector: kind,
        stopped_early: report_index.is_some(),
        delay: report_index.and_then(|r| r.checked_sub(onset)),
        report_index,
        onset_index: onset,
        stream_len: inputs.len(),
        raw_flags,
        warmup,
    })
}

/// Embeds the stream (when the detector needs it) and runs the detector.
pub fn run_stream(
    kind: DetectorKind,
    model: Option<(&MlpParams, &Centroids)>,
    reference: ArrayView2<f64>,
    monitored: ArrayView2<f64>,
    onset: usize,
    cfg: &DetectorConfig,
) -> Result<RunResult> {
    let model = if kind.needs_model() { model } else { None };
    if kind.needs_model() && model.is_none() {
        return Err(DriftlabError::InvalidArgument(format!(
            "detector `{kind}` needs a trained model"
        )));
    }
    let stream = PreparedStream::new(model, reference, monitored, onset)?;
    run_prepared(kind, &stream, cfg)
}
