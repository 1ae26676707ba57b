use super::Detector;
use crate::error::{DriftlabError, Result};

/// Exponential moving average detector on the closest-centroid distance.
///
/// `var` follows `λ·var + (1−λ)(m − μ)²` and its square root is the spread
/// added to the mean when the threshold is refreshed.
#[derive(Debug, Clone)]
pub struct Emad {
    lambda: f64,
    mu: f64,
    var: f64,
    beta: f64,
}

impl Emad {
    /// Starts from the reference mean and standard deviation.
    pub fn new(mu0: f64, sigma0: f64, lambda: f64) -> Result<Self> {
        if !(mu0.is_finite() && sigma0.is_finite() && sigma0 >= 0.0) {
            return Err(DriftlabError::InvalidArgument(
                "EMAD needs finite reference moments".into(),
            ));
        }
        Ok(Emad {
            lambda,
            mu: mu0,
            var: sigma0 * sigma0,
            beta: mu0 + sigma0,
        })
    }

    pub fn mean(&self) -> f64 {
        self.mu
    }

    pub fn variance(&self) -> f64 {
        self.var
    }

    pub fn threshold(&self) -> f64 {
        self.beta
    }

    pub fn update(&mut self, m: f64) -> bool {
        let l = self.lambda;
        self.mu = l * self.mu + (1.0 - l) * m;
        self.var = l * self.var + (1.0 - l) * (m - self.mu).powi(2);
        let flag = self.mu > self.beta;
        if !flag {
            self.beta = self.mu + self.var.sqrt();
        }
        flag
    }
}

impl Detector for Emad {
    fn step(&mut self, x: &[f64]) -> Result<Option<bool>> {
        Ok(Some(self.update(x[0])))
    }
}
