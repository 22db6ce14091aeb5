use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MS_PER_HOUR: i64 = 3_600_000;

/// Gap-free hourly traffic of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSeries {
    pub cell_id: String,
    /// First hour, counted from the Unix epoch.
    pub start_hour: i64,
    pub values: Vec<f64>,
}

/// What had to be fixed while turning raw rows into an hourly series.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairReport {
    pub rows: usize,
    /// Hours with no observation, filled by linear interpolation.
    pub interpolated: Vec<i64>,
    /// Rows whose exact timestamp was already seen (summed).
    pub duplicates: usize,
    /// Rows earlier than the preceding row.
    pub out_of_order: usize,
}

impl TrafficSeries {
    pub fn new(cell_id: impl Into<String>, start_hour: i64, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("traffic", "values must be finite and nonnegative"));
        }
        Ok(Self {
            cell_id: cell_id.into(),
            start_hour,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn hour(&self, index: usize) -> i64 {
        self.start_hour + index as i64
    }

    pub fn total_volume(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Builds an hourly series from `(unix_ms, traffic)` rows in file order.
    ///
    /// Rows are summed into hourly bins; missing interior hours are linearly
    /// interpolated and listed in the report.
    pub fn from_observations(
        cell_id: impl Into<String>,
        rows: &[(i64, f64)],
    ) -> Result<(Self, RepairReport)> {
        if rows.is_empty() {
            return Err(Error::SeriesTooShort { needed: 1, got: 0 });
        }
        let mut report = RepairReport {
            rows: rows.len(),
            ..RepairReport::default()
        };
        let mut seen: BTreeMap<i64, ()> = BTreeMap::new();
        let mut bins: BTreeMap<i64, f64> = BTreeMap::new();
        let mut prev: Option<i64> = None;
        for &(ms, v) in rows {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid("traffic", "values must be finite and nonnegative"));
            }
            if prev.is_some_and(|p| ms < p) {
                report.out_of_order += 1;
            }
            prev = Some(ms);
            if seen.insert(ms, ()).is_some() {
                report.duplicates += 1;
            }
            *bins.entry(ms.div_euclid(MS_PER_HOUR)).or_insert(0.0) += v;
        }
        let (&start, _) = bins.first_key_value().expect("nonempty");
        let (&end, _) = bins.last_key_value().expect("nonempty");
        let mut values = Vec::with_capacity((end - start + 1) as usize);
        let mut last: Option<(i64, f64)> = None;
        for (&h, &v) in &bins {
            if let Some((lh, lv)) = last {
                let gap = h - lh;
                for k in 1..gap {
                    let w = k as f64 / gap as f64;
                    values.push(lv + (v - lv) * w);
                    report.interpolated.push(lh + k);
                }
            }
            values.push(v);
            last = Some((h, v));
        }
        Ok((Self::new(cell_id, start, values)?, report))
    }
}
