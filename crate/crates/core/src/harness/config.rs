use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::data::DriftKind;
use crate::detectors::{DetectorConfig, DetectorKind};
use crate::drift::FeatureMode;
use crate::error::{DriftlabError, Result};
use crate::eval::DEFAULT_GAMMA;
use crate::neural::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Rbf,
    MovingRbf,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Rbf => "rbf",
            Preset::MovingRbf => "moving_rbf",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = DriftlabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rbf" => Ok(Preset::Rbf),
            "moving_rbf" | "movrbf" => Ok(Preset::MovingRbf),
            other => Err(DriftlabError::InvalidConfig(format!(
                "unknown preset `{other}` (expected rbf or moving_rbf)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Preset(Preset),
    Csv { path: PathBuf, label_column: String },
}

impl DatasetSource {
    /// Short name used in result tables.
    pub fn name(&self) -> String {
        match self {
            DatasetSource::Preset(p) => p.as_str().to_string(),
            DatasetSource::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        }
    }

    /// Whether drift comes from the generator rather than feature corruption.
    pub fn intrinsic_drift(&self) -> bool {
        matches!(self, DatasetSource::Preset(Preset::MovingRbf))
    }
}

/// Which training objectives to benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstrainedSetting {
    Only(bool),
    Both,
}

impl ConstrainedSetting {
    pub fn values(self) -> Vec<bool> {
        match self {
            ConstrainedSetting::Only(b) => vec![b],
            ConstrainedSetting::Both => vec![true, false],
        }
    }
}

impl Serialize for ConstrainedSetting {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ConstrainedSetting::Only(b) => s.serialize_bool(*b),
            ConstrainedSetting::Both => s.serialize_str("both"),
        }
    }
}

impl<'de> Deserialize<'de> for ConstrainedSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Flag(bool),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Flag(b) => Ok(ConstrainedSetting::Only(b)),
            Raw::Word(w) if w == "both" => Ok(ConstrainedSetting::Both),
            Raw::Word(w) if w == "true" => Ok(ConstrainedSetting::Only(true)),
            Raw::Word(w) if w == "false" => Ok(ConstrainedSetting::Only(false)),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "constrained must be true, false or \"both\", got `{w}`"
            ))),
        }
    }
}

impl std::str::FromStr for ConstrainedSetting {
    type Err = DriftlabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "true" => Ok(ConstrainedSetting::Only(true)),
            "false" => Ok(ConstrainedSetting::Only(false)),
            "both" => Ok(ConstrainedSetting::Both),
            other => Err(DriftlabError::InvalidConfig(format!(
                "constrained must be true, false or both, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftGrid {
    pub kinds: Vec<DriftKind>,
    #[serde(default = "default_modes")]
    pub feature_modes: Vec<FeatureMode>,
}

fn default_modes() -> Vec<FeatureMode> {
    vec![FeatureMode::Most, FeatureMode::Least]
}

impl Default for DriftGrid {
    fn default() -> Self {
        DriftGrid {
            kinds: vec![DriftKind::Step, DriftKind::Gradual],
            feature_modes: default_modes(),
        }
    }
}

/// One drift condition applied to a test stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DriftSetting {
    pub kind: DriftKind,
    /// `None` when no features are corrupted (no drift, or drift built into the data).
    pub feature_mode: Option<FeatureMode>,
}

impl DriftSetting {
    pub fn mode_str(&self) -> &'static str {
        self.feature_mode.map_or("none", FeatureMode::as_str)
    }

    pub fn slug(&self) -> String {
        format!("{}_{}", self.kind.as_str(), self.mode_str())
    }
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

fn default_constrained() -> ConstrainedSetting {
    ConstrainedSetting::Both
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub detectors: Vec<DetectorKind>,
    #[serde(default = "default_constrained")]
    pub constrained: ConstrainedSetting,
    #[serde(default)]
    pub drift: DriftGrid,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSource, detectors: Vec<DetectorKind>) -> Self {
        ExperimentConfig {
            dataset,
            detectors,
            constrained: default_constrained(),
            drift: DriftGrid::default(),
            detector: DetectorConfig::default(),
            gamma: DEFAULT_GAMMA,
            train: TrainConfig::default(),
            seeds: default_seeds(),
            output_dir: default_output(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| DriftlabError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DriftlabError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.detectors.is_empty() {
            return Err(DriftlabError::InvalidConfig("detector list is empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(DriftlabError::InvalidConfig("seed list is empty".into()));
        }
        if self.drift.kinds.is_empty() {
            return Err(DriftlabError::InvalidConfig("drift kind list is empty".into()));
        }
        if self.drift.feature_modes.is_empty() && !self.dataset.intrinsic_drift() {
            return Err(DriftlabError::InvalidConfig("feature mode list is empty".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(DriftlabError::InvalidConfig("gamma must be positive".into()));
        }
        self.detector.validate()?;
        self.train.validate()?;
        Ok(())
    }

    /// Drift conditions to run, in configuration order without duplicates.
    pub fn drift_settings(&self) -> Vec<DriftSetting> {
        let mut out: Vec<DriftSetting> = Vec::new();
        for &kind in &self.drift.kinds {
            let modes: Vec<Option<FeatureMode>> =
                if kind == DriftKind::None || self.dataset.intrinsic_drift() {
                    vec![None]
                } else {
                    self.drift.feature_modes.iter().copied().map(Some).collect()
                };
            for feature_mode in modes {
                let s = DriftSetting { kind, feature_mode };
                if !out.contains(&s) {
                    out.push(s);
                }
            }
        }
        out
    }

    /// Hex digest of the canonical JSON form, ignoring `output_dir`; names the
    /// results directory.
    pub fn hash(&self) -> String {
        let mut stripped = self.clone();
        stripped.output_dir = PathBuf::new();
        let canonical = serde_json::to_string(&stripped).expect("config serializes");
        hex::encode(&Sha256::digest(canonical.as_bytes())[..8])
    }
}
