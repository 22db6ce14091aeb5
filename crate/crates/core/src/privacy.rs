//! Gaussian local-DP mechanism and the Wasserstein radius of the ambiguity
//! set around each client's noisy empirical distribution.
//!
//! The radius is `rho = eta + sigma`: `eta` shrinks with the sample count
//! (light-tailed concentration), `sigma = c3 / eps` is the noise scale of the
//! Gaussian mechanism with `c3 = sqrt(2 d ln(1.25/delta)) * sensitivity`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::Batch;

/// A single failed constraint, reported by field name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub field: &'static str,
    pub message: String,
}

impl Issue {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyConfig {
    pub delta: f64,
    /// L2 sensitivity of one sample after min-max scaling.
    pub sensitivity: f64,
    /// Per-client budget cap `a`.
    pub budget_cap: f64,
    pub epsilon_min: f64,
    /// Ambient dimension `d = d_x + d_y`.
    pub dim: usize,
    pub gamma: f64,
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        Self {
            delta: 1e-5,
            sensitivity: 1.0,
            budget_cap: 1.0,
            epsilon_min: 1e-2,
            dim: 1,
            gamma: 0.05,
            beta: 2.0,
            c1: 2.0,
            c2: 1.0,
        }
    }
}

impl PrivacyConfig {
    pub fn issues(&self) -> Vec<Issue> {
        let mut out = Vec::new();
        if !(self.delta > 0.0 && self.delta < 1.0) {
            out.push(Issue::new("delta", "must lie in (0, 1)"));
        }
        if !(self.sensitivity > 0.0 && self.sensitivity.is_finite()) {
            out.push(Issue::new("sensitivity", "must be positive"));
        }
        if !(self.epsilon_min > 0.0 && self.epsilon_min.is_finite()) {
            out.push(Issue::new("epsilon_min", "must be positive"));
        }
        if !(self.budget_cap > self.epsilon_min && self.budget_cap.is_finite()) {
            out.push(Issue::new("budget_a", "must exceed epsilon_min"));
        }
        if self.dim == 0 {
            out.push(Issue::new("dim", "must be at least 1"));
        }
        if self.dim == 2 {
            out.push(Issue::new(
                "dim",
                "d = d_x + d_y = 2 is outside the radius formula's domain",
            ));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            out.push(Issue::new("gamma", "must lie in (0, 1)"));
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            out.push(Issue::new("beta", "must exceed 1"));
        }
        if !(self.c1 > self.gamma && self.c1.is_finite()) {
            out.push(Issue::new(
                "c1",
                format!("must exceed gamma ({}) so that ln(c1/gamma) > 0", self.gamma),
            ));
        }
        if !(self.c2 > 0.0 && self.c2.is_finite()) {
            out.push(Issue::new("c2", "must be positive"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.issues().into_iter().next() {
            None => Ok(()),
            Some(i) => Err(Error::InvalidParameter {
                name: i.field,
                reason: i.message,
            }),
        }
    }

    /// `c3 = sqrt(2 d ln(1.25/delta)) * sensitivity`.
    pub fn c3(&self) -> f64 {
        libm::sqrt(2.0 * self.dim as f64 * libm::log(1.25 / self.delta)) * self.sensitivity
    }
}

/// Noise standard deviation for a given privacy level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseScale {
    pub sigma: f64,
    pub c3: f64,
}

/// `sigma = c3 / eps`.
pub fn gaussian_sigma(eps: f64, cfg: &PrivacyConfig) -> Result<NoiseScale> {
    if !(eps > 0.0) || eps.is_nan() {
        return Err(Error::invalid("eps", "privacy level must be positive"));
    }
    let c3 = cfg.c3();
    Ok(NoiseScale { sigma: c3 / eps, c3 })
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every input entry; targets are kept.
///
/// `sigma == 0` returns an exact copy and draws nothing from `rng`.
pub fn perturb_batch<R: Rng + ?Sized>(batch: &Batch, sigma: f64, rng: &mut R) -> Batch {
    let mut out = batch.clone();
    if sigma == 0.0 {
        return out;
    }
    for x in out.inputs_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *x += sigma * z;
    }
    out
}

/// Sampling part of the Wasserstein radius for `n` samples.
pub fn eta_radius(n: usize, cfg: &PrivacyConfig) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n", "sample count must be positive"));
    }
    if !(cfg.c1 > cfg.gamma) {
        return Err(Error::invalid("c1", "ln(c1/gamma) must be positive"));
    }
    if !(cfg.c2 > 0.0) {
        return Err(Error::invalid("c2", "must be positive"));
    }
    let log_term = libm::log(cfg.c1 / cfg.gamma);
    let threshold = log_term / cfg.c2;
    let base = log_term / (cfg.c2 * n as f64);
    let exponent = if n as f64 >= threshold {
        1.0 / (cfg.dim.max(2) as f64)
    } else {
        1.0 / cfg.beta
    };
    Ok(libm::pow(base, exponent))
}

/// `rho = eta + sigma`.
pub fn wasserstein_radius(eta: f64, sigma: f64) -> f64 {
    eta + sigma
}
