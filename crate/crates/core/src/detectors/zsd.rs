use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::Detector;
use crate::embedding_stats::ReferenceStatistics;
use crate::error::{DriftlabError, Result};

/// Spread substituted for a degenerate (zero-variance) reference.
pub const ZSD_SIGMA_FLOOR: f64 = 1e-9;

/// `1 − Φ(z)`, evaluated through `erfc` to keep precision in the tail.
pub fn upper_tail_p(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// How unflagged samples refresh the reference moments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZsdUpdate {
    /// Push the sample into the bounded reference buffer and use its moments.
    #[default]
    ReferenceWindow,
    /// Exponential moving mean and variance with the forgetting factor.
    Ema,
}

#[derive(Debug, Clone)]
enum Moments {
    Window(ReferenceStatistics),
    Ema { lambda: f64, mu: f64, var: f64 },
}

/// z-score detector: flags distances that are improbably large under the
/// reference moments.
#[derive(Debug, Clone)]
pub struct Zsd {
    alpha: f64,
    moments: Moments,
}

impl Zsd {
    /// Moments come from `reference`, which absorbs every unflagged sample.
    pub fn with_reference(reference: ReferenceStatistics, alpha: f64) -> Result<Self> {
        if reference.dim() != 1 || reference.is_empty() {
            return Err(DriftlabError::InvalidArgument(
                "ZSD needs a non-empty scalar reference".into(),
            ));
        }
        if reference.std()[0] == 0.0 {
            log::warn!("zero-variance reference for ZSD; using sigma = {ZSD_SIGMA_FLOOR}");
        }
        Ok(Zsd {
            alpha,
            moments: Moments::Window(reference),
        })
    }

    /// Moments start at `(mu_ref, sigma_ref)` and follow exponential moving averages.
    pub fn with_ema(mu_ref: f64, sigma_ref: f64, lambda: f64, alpha: f64) -> Result<Self> {
        if !(mu_ref.is_finite() && sigma_ref.is_finite() && sigma_ref >= 0.0) {
            return Err(DriftlabError::InvalidArgument(
                "ZSD needs finite reference moments".into(),
            ));
        }
        if sigma_ref == 0.0 {
            log::warn!("zero-variance reference for ZSD; using sigma = {ZSD_SIGMA_FLOOR}");
        }
        Ok(Zsd {
            alpha,
            moments: Moments::Ema {
                lambda,
                mu: mu_ref,
                var: sigma_ref * sigma_ref,
            },
        })
    }

    pub fn mean(&self) -> f64 {
        match &self.moments {
            Moments::Window(r) => r.mean()[0],
            Moments::Ema { mu, .. } => *mu,
        }
    }

    pub fn sigma(&self) -> f64 {
        let s = match &self.moments {
            Moments::Window(r) => r.std()[0],
            Moments::Ema { var, .. } => var.sqrt(),
        };
        s.max(ZSD_SIGMA_FLOOR)
    }

    pub fn z_score(&self, m: f64) -> f64 {
        (m - self.mean()) / self.sigma()
    }

    pub fn update(&mut self, m: f64) -> bool {
        let flag = upper_tail_p(self.z_score(m)) < self.alpha;
        if !flag {
            match &mut self.moments {
                Moments::Window(r) => {
                    r.push(&[m]).expect("scalar reference");
                }
                Moments::Ema { lambda, mu, var } => {
                    let l = *lambda;
                    *mu = l * *mu + (1.0 - l) * m;
                    *var = l * *var + (1.0 - l) * (m - *mu).powi(2);
                }
            }
        }
        flag
    }
}

impl Detector for Zsd {
    fn step(&mut self, x: &[f64]) -> Result<Option<bool>> {
        Ok(Some(self.update(x[0])))
    }
}
