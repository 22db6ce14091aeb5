use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Latency of one compute-and-upload round in virtual seconds:
/// `multiplier * exp(log_mean + log_std * N(0, 1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    pub log_mean: f64,
    pub log_std: f64,
    pub multiplier: f64,
}

impl Default for DelayModel {
    fn default() -> Self {
        Self {
            log_mean: 0.0,
            log_std: 0.25,
            multiplier: 1.0,
        }
    }
}

impl DelayModel {
    pub fn constant(value: f64) -> Self {
        Self {
            log_mean: libm::log(value),
            log_std: 0.0,
            multiplier: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.log_mean.is_finite() {
            return Err(Error::invalid("delay.log_mean", "must be finite"));
        }
        if !(self.log_std >= 0.0 && self.log_std.is_finite()) {
            return Err(Error::invalid("delay.log_std", "must be finite and nonnegative"));
        }
        if !(self.multiplier > 0.0 && self.multiplier.is_finite()) {
            return Err(Error::invalid("delay.multiplier", "must be positive"));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let n: f64 = rng.sample(StandardNormal);
        self.multiplier * libm::exp(self.log_mean + self.log_std * n)
    }
}
