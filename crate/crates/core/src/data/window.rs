use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::calendar::{day_of_week, HolidayCalendar};
use super::series::TrafficSeries;
use crate::error::{Error, Result};
use crate::mlp::Batch;

/// Seven day-of-week indicators plus a holiday flag.
pub const META_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    /// Short-term lags (hours).
    pub n_c: usize,
    /// Periodic lags (days).
    pub n_p: usize,
    /// Forecast horizon; the target is the next `horizon` hours.
    pub horizon: usize,
    /// Trailing hours reserved for testing.
    pub test_hours: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            n_c: 12,
            n_p: 3,
            horizon: 1,
            test_hours: 7 * 24,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_c == 0 {
            return Err(Error::invalid("n_c", "must be positive"));
        }
        if self.horizon != 1 && self.horizon != 24 {
            return Err(Error::invalid("H", "horizon must be 1 or 24"));
        }
        Ok(())
    }

    pub fn d_x(&self) -> usize {
        self.n_c + self.n_p + META_DIM
    }

    pub fn d_y(&self) -> usize {
        self.horizon
    }

    /// Index of the first usable forecast origin.
    pub fn first_origin(&self) -> usize {
        (24 * self.n_p).max(self.n_c - 1)
    }

    /// Shortest series that yields one window.
    pub fn min_len(&self) -> usize {
        self.first_origin() + self.horizon + 1
    }
}

/// Unnormalized supervised samples of one cell.
///
/// Sample `j` has forecast origin `t = first_origin + j`, features
/// `[v[t-n_c+1..=t], v[t+H-24k] for k = 1..=n_p, meta(t+H)]` and target
/// `v[t+1..=t+H]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedDataset {
    pub cell_id: String,
    pub config: WindowConfig,
    pub samples: Batch,
    /// Origin index of each sample.
    pub origins: Vec<usize>,
    pub series_len: usize,
}

impl WindowedDataset {
    fn test_start(&self) -> usize {
        self.series_len.saturating_sub(self.config.test_hours)
    }

    /// Samples whose whole target lies before the test span.
    pub fn train_indices(&self) -> Vec<usize> {
        let cut = self.test_start();
        (0..self.origins.len())
            .filter(|&j| self.origins[j] + self.config.horizon < cut)
            .collect()
    }

    /// Samples whose target starts inside the test span.
    pub fn test_indices(&self) -> Vec<usize> {
        let cut = self.test_start();
        (0..self.origins.len())
            .filter(|&j| self.origins[j] + 1 >= cut)
            .collect()
    }

    pub fn train(&self) -> Batch {
        self.samples.select(&self.train_indices())
    }

    pub fn test(&self) -> Batch {
        self.samples.select(&self.test_indices())
    }
}

pub fn make_windows(
    series: &TrafficSeries,
    config: &WindowConfig,
    holidays: &HolidayCalendar,
) -> Result<WindowedDataset> {
    config.validate()?;
    let v = &series.values;
    let needed = config.min_len();
    if v.len() < needed {
        return Err(Error::SeriesTooShort {
            needed,
            got: v.len(),
        });
    }
    let h = config.horizon;
    let mut samples = Batch::empty(config.d_x(), config.d_y());
    let mut origins = Vec::new();
    let mut x = Vec::with_capacity(config.d_x());
    for t in config.first_origin()..v.len() - h {
        x.clear();
        x.extend_from_slice(&v[t + 1 - config.n_c..=t]);
        for k in 1..=config.n_p {
            x.push(v[t + h - 24 * k]);
        }
        let hour = series.hour(t + h);
        let dow = day_of_week(hour);
        for d in 0..7 {
            x.push(if d == dow { 1.0 } else { 0.0 });
        }
        x.push(if holidays.is_holiday(hour) { 1.0 } else { 0.0 });
        samples.push(&x, &v[t + 1..=t + h]);
        origins.push(t);
    }
    Ok(WindowedDataset {
        cell_id: series.cell_id.clone(),
        config: *config,
        samples,
        origins,
        series_len: v.len(),
    })
}
