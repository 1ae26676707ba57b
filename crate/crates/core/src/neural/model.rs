use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::loss::Centroids;
use super::mlp::{Dense, MlpParams, EMBEDDING_DIM};
use super::train::TrainConfig;
use crate::data::NormStats;
use crate::error::{DriftlabError, Result};

/// Version tag of the serialized model document.
pub const MODEL_FORMAT: &str = "driftlab-model/1";

/// A trained network with its centroids and input standardisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: MlpParams,
    pub centroids: Centroids,
    pub norm: Option<NormStats>,
    pub config: TrainConfig,
    /// Whether the centroids were learned jointly (otherwise class means).
    pub constrained: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    /// `[inputs, outputs]`
    shape: [usize; 2],
    /// Row-major `inputs x outputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    version: String,
    input_dim: usize,
    classes: usize,
    constrained: bool,
    encoder: Vec<LayerDoc>,
    classifier: LayerDoc,
    centroids: Vec<Vec<f64>>,
    norm_stats: Option<NormStats>,
    train_config: TrainConfig,
}

impl LayerDoc {
    fn from_dense(d: &Dense) -> Self {
        LayerDoc {
            shape: [d.inputs(), d.outputs()],
            weights: d.weights.iter().copied().collect(),
            bias: d.bias.to_vec(),
        }
    }

    fn into_dense(self) -> Result<Dense> {
        let [rows, cols] = self.shape;
        if self.bias.len() != cols {
            return Err(DriftlabError::DimensionMismatch {
                expected: cols,
                found: self.bias.len(),
            });
        }
        let weights = Array2::from_shape_vec((rows, cols), self.weights).map_err(|_| {
            DriftlabError::InvalidArgument(format!("layer weights do not fill {rows}x{cols}"))
        })?;
        Ok(Dense {
            weights,
            bias: Array1::from(self.bias),
        })
    }
}

impl Model {
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            version: MODEL_FORMAT.to_owned(),
            input_dim: self.params.input_dim(),
            classes: self.params.classes(),
            constrained: self.constrained,
            encoder: self.params.encoder.iter().map(LayerDoc::from_dense).collect(),
            classifier: LayerDoc::from_dense(&self.params.classifier),
            centroids: self.centroids.0.rows().into_iter().map(|r| r.to_vec()).collect(),
            norm_stats: self.norm.clone(),
            train_config: self.config.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.version != MODEL_FORMAT {
            return Err(DriftlabError::InvalidArgument(format!(
                "unsupported model version `{}` (expected {MODEL_FORMAT})",
                doc.version
            )));
        }
        let encoder = doc
            .encoder
            .into_iter()
            .map(LayerDoc::into_dense)
            .collect::<Result<Vec<_>>>()?;
        let classifier = doc.classifier.into_dense()?;
        if encoder.is_empty() {
            return Err(DriftlabError::InvalidArgument("model has no encoder layers".into()));
        }
        for pair in encoder.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(DriftlabError::DimensionMismatch {
                    expected: pair[0].outputs(),
                    found: pair[1].inputs(),
                });
            }
        }
        let embed = encoder.last().expect("non-empty").outputs();
        if embed != EMBEDDING_DIM || classifier.inputs() != EMBEDDING_DIM {
            return Err(DriftlabError::DimensionMismatch {
                expected: EMBEDDING_DIM,
                found: embed,
            });
        }
        let params = MlpParams { encoder, classifier };
        if params.input_dim() != doc.input_dim || params.classes() != doc.classes {
            return Err(DriftlabError::InvalidArgument(
                "declared dimensions disagree with layer shapes".into(),
            ));
        }
        let k = doc.centroids.len();
        if k != doc.classes || doc.centroids.iter().any(|c| c.len() != EMBEDDING_DIM) {
            return Err(DriftlabError::InvalidArgument(
                "centroids must be classes x 3".into(),
            ));
        }
        let flat: Vec<f64> = doc.centroids.into_iter().flatten().collect();
        let centroids = Centroids(
            Array2::from_shape_vec((k, EMBEDDING_DIM), flat).expect("checked shape"),
        );
        if let Some(norm) = &doc.norm_stats {
            if norm.q() != params.input_dim() {
                return Err(DriftlabError::DimensionMismatch {
                    expected: params.input_dim(),
                    found: norm.q(),
                });
            }
        }
        Ok(Model {
            params,
            centroids,
            norm: doc.norm_stats,
            config: doc.train_config,
            constrained: doc.constrained,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| DriftlabError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| DriftlabError::io(path, e))?;
        Model::from_json(&text)
    }
}
