use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::series::TrafficSeries;
use crate::error::{Error, Result};
use crate::rng::{purpose, stream};

/// Parameters of the synthetic traffic generator.
///
/// Per cell: `base * (1 + daily sin) * (1 + weekly sin) + surges + noise`,
/// clipped at zero. `base` is drawn uniformly from `[base_min, base_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticProfile {
    pub base_min: f64,
    pub base_max: f64,
    /// Relative amplitude of the 24-hour cycle.
    pub daily_amplitude: f64,
    /// Relative amplitude of the 7-day cycle.
    pub weekly_amplitude: f64,
    /// Probability per hour that a surge starts.
    pub surge_rate: f64,
    /// Log-mean and log-std of a surge's size relative to `base`.
    pub surge_log_mean: f64,
    pub surge_log_std: f64,
    /// Gaussian noise std relative to `base`.
    pub noise_std: f64,
    /// First hour since the Unix epoch.
    pub start_hour: i64,
}

impl Default for SyntheticProfile {
    fn default() -> Self {
        Self {
            base_min: 50.0,
            base_max: 500.0,
            daily_amplitude: 0.6,
            weekly_amplitude: 0.2,
            surge_rate: 0.005,
            surge_log_mean: 0.0,
            surge_log_std: 0.5,
            noise_std: 0.05,
            start_hour: 384_240,
        }
    }
}

impl SyntheticProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_min >= 0.0 && self.base_max >= self.base_min && self.base_max.is_finite()) {
            return Err(Error::invalid("profile.base", "need 0 <= base_min <= base_max"));
        }
        for (name, v) in [
            ("profile.daily_amplitude", self.daily_amplitude),
            ("profile.weekly_amplitude", self.weekly_amplitude),
            ("profile.noise_std", self.noise_std),
            ("profile.surge_log_std", self.surge_log_std),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be finite and nonnegative"));
            }
        }
        if !(0.0..=1.0).contains(&self.surge_rate) {
            return Err(Error::invalid("profile.surge_rate", "must be a probability"));
        }
        if !self.surge_log_mean.is_finite() {
            return Err(Error::invalid("profile.surge_log_mean", "must be finite"));
        }
        Ok(())
    }
}

/// Synthetic hourly series for `n_cells` cells over `n_days` days, together
/// with the surge start hours (indices) of each cell.
pub fn generate_synthetic_with_surges(
    n_cells: usize,
    n_days: usize,
    seed: u64,
    profile: &SyntheticProfile,
) -> Result<(Vec<TrafficSeries>, Vec<Vec<usize>>)> {
    profile.validate()?;
    if n_cells == 0 {
        return Err(Error::invalid("n_cells", "must be positive"));
    }
    if n_days == 0 {
        return Err(Error::invalid("n_days", "must be positive"));
    }
    let surge = LogNormal::new(profile.surge_log_mean, profile.surge_log_std)
        .map_err(|_| Error::invalid("profile.surge_log_std", "invalid lognormal"))?;
    let hours = n_days * 24;
    let mut series = Vec::with_capacity(n_cells);
    let mut surges = Vec::with_capacity(n_cells);
    for cell in 0..n_cells {
        let mut rng = stream(seed, purpose::SYNTHETIC, cell as u64);
        let base = profile.base_min + (profile.base_max - profile.base_min) * rng.random::<f64>();
        let phase = 24.0 * rng.random::<f64>();
        let daily = profile.daily_amplitude * (0.8 + 0.4 * rng.random::<f64>());
        let weekly = profile.weekly_amplitude * (0.8 + 0.4 * rng.random::<f64>());
        let mut values = Vec::with_capacity(hours);
        let mut starts = Vec::new();
        for h in 0..hours {
            let abs = profile.start_hour + h as i64;
            let hod = abs.rem_euclid(24) as f64;
            let dow = abs.div_euclid(24).rem_euclid(7) as f64;
            let mut v = base
                * (1.0 + daily * libm::sin(2.0 * PI * (hod + phase) / 24.0))
                * (1.0 + weekly * libm::sin(2.0 * PI * dow / 7.0));
            if profile.surge_rate > 0.0 && rng.random::<f64>() < profile.surge_rate {
                v += base * surge.sample(&mut rng);
                starts.push(h);
            }
            if profile.noise_std > 0.0 {
                v += base * profile.noise_std * rng.sample::<f64, _>(StandardNormal);
            }
            values.push(v.max(0.0));
        }
        series.push(TrafficSeries::new(
            format!("cell_{cell:03}"),
            profile.start_hour,
            values,
        )?);
        surges.push(starts);
    }
    Ok((series, surges))
}

pub fn generate_synthetic(
    n_cells: usize,
    n_days: usize,
    seed: u64,
    profile: &SyntheticProfile,
) -> Result<Vec<TrafficSeries>> {
    generate_synthetic_with_surges(n_cells, n_days, seed, profile).map(|(s, _)| s)
}
