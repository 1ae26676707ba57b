//! Streaming change detectors and the end-to-end stream runner.

mod emad;
mod hdddm;
mod iks;
mod runner;
mod window;
mod zsd;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DriftlabError, Result};

pub use emad::Emad;
pub use hdddm::{hellinger, histogram, Hdddm};
pub use iks::{ks_critical_coefficient, ks_statistic, ks_threshold, Iks};
pub use runner::{run_prepared, run_stream, PreparedStream, RunResult};
pub use window::{windowed_decision, WindowedDecision};
pub use zsd::{upper_tail_p, Zsd, ZsdUpdate, ZSD_SIGMA_FLOOR};

/// A sequential change detector fed one observation at a time.
pub trait Detector {
    /// Raw flag `o_i` for the observation, or `None` while still warming up.
    fn step(&mut self, x: &[f64]) -> Result<Option<bool>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DetectorKind {
    #[serde(rename = "zsd")]
    Zsd,
    #[serde(rename = "emad")]
    Emad,
    #[serde(rename = "iks")]
    Iks,
    #[serde(rename = "hdddm_e")]
    HdddmE,
    #[serde(rename = "hdddm_i")]
    HdddmI,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        DetectorKind::Zsd,
        DetectorKind::Emad,
        DetectorKind::Iks,
        DetectorKind::HdddmE,
        DetectorKind::HdddmI,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Zsd => "zsd",
            DetectorKind::Emad => "emad",
            DetectorKind::Iks => "iks",
            DetectorKind::HdddmE => "hdddm_e",
            DetectorKind::HdddmI => "hdddm_i",
        }
    }

    /// Whether the detector consumes the network embedding (all but HDDDM_I).
    pub fn needs_model(self) -> bool {
        self != DetectorKind::HdddmI
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorKind {
    type Err = DriftlabError;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                DriftlabError::InvalidConfig(format!(
                    "unknown detector `{s}` (expected one of zsd, emad, iks, hdddm_e, hdddm_i)"
                ))
            })
    }
}

fn default_w() -> usize {
    50
}
fn default_r() -> f64 {
    0.25
}
fn default_lambda() -> f64 {
    0.95
}
fn default_alpha_zsd() -> f64 {
    0.05
}
fn default_alpha_iks() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// Drift-report history length.
    #[serde(default = "default_w")]
    pub w: usize,
    /// Fraction of flagged samples in the history needed for a report.
    #[serde(default = "default_r")]
    pub r: f64,
    /// Largest acceptable delay; `6w` when unset.
    #[serde(default)]
    pub d_max: Option<usize>,
    /// Forgetting factor of the moving averages.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_alpha_zsd")]
    pub alpha_zsd: f64,
    /// How ZSD refreshes its reference moments.
    #[serde(default)]
    pub zsd_update: ZsdUpdate,
    #[serde(default = "default_alpha_iks")]
    pub alpha_iks: f64,
    /// Window length of IKS and HDDDM; `5w` when unset.
    #[serde(default)]
    pub baseline_window: Option<usize>,
    /// Histogram bins per feature for HDDDM; `max(2, floor(sqrt(window)))` when unset.
    #[serde(default)]
    pub hdddm_bins: Option<usize>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            w: default_w(),
            r: default_r(),
            d_max: None,
            lambda: default_lambda(),
            alpha_zsd: default_alpha_zsd(),
            zsd_update: ZsdUpdate::default(),
            alpha_iks: default_alpha_iks(),
            baseline_window: None,
            hdddm_bins: None,
        }
    }
}

impl DetectorConfig {
    pub fn d_max(&self) -> usize {
        self.d_max.unwrap_or(6 * self.w)
    }

    pub fn baseline_window(&self) -> usize {
        self.baseline_window.unwrap_or(5 * self.w)
    }

    pub fn hdddm_bins(&self) -> usize {
        self.hdddm_bins
            .unwrap_or_else(|| ((self.baseline_window() as f64).sqrt().floor() as usize).max(2))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(DriftlabError::InvalidConfig(msg.to_owned()));
        if self.w == 0 {
            return bad("w must be at least 1");
        }
        // r = 0 is admitted so the ablation grid can probe the report-on-any-flag corner.
        if !(0.0..=1.0).contains(&self.r) {
            return bad("r must lie in [0, 1]");
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad("lambda must lie in (0, 1)");
        }
        for (name, a) in [("alpha_zsd", self.alpha_zsd), ("alpha_iks", self.alpha_iks)] {
            if !(a > 0.0 && a < 1.0) {
                return Err(DriftlabError::InvalidConfig(format!("{name} must lie in (0, 1)")));
            }
        }
        if self.d_max() == 0 {
            return bad("d_max must be positive");
        }
        if self.baseline_window() < 2 {
            return bad("baseline window must hold at least 2 samples");
        }
        if self.hdddm_bins() < 2 {
            return bad("hdddm_bins must be at least 2");
        }
        Ok(())
    }
}
