use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::Batch;

/// Per-feature min-max scaling to `[0, 1]`. Constant features map to 0.
/// Values outside the fitted range are passed through unclipped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn is_fitted(&self) -> bool {
        !self.mins.is_empty()
    }

    pub fn width(&self) -> usize {
        self.mins.len()
    }

    pub fn mins(&self) -> &[f64] {
        &self.mins
    }

    pub fn maxs(&self) -> &[f64] {
        &self.maxs
    }

    /// Fits on row-major `rows` of `width` features.
    pub fn fit(rows: &[f64], width: usize) -> Result<Self> {
        if width == 0 || rows.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if !rows.len().is_multiple_of(width) {
            return Err(Error::Shape {
                what: "scaler rows",
                expected: width,
                got: rows.len(),
            });
        }
        let mut mins = rows[..width].to_vec();
        let mut maxs = mins.clone();
        for row in rows.chunks_exact(width) {
            for (k, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite("scaler fit"));
                }
                mins[k] = mins[k].min(*v);
                maxs[k] = maxs[k].max(*v);
            }
        }
        Ok(Self { mins, maxs })
    }

    fn check(&self, len: usize) -> Result<()> {
        if !self.is_fitted() {
            return Err(Error::NotFitted);
        }
        if !len.is_multiple_of(self.width()) {
            return Err(Error::Shape {
                what: "scaler input",
                expected: self.width(),
                got: len,
            });
        }
        Ok(())
    }

    pub fn apply_in_place(&self, rows: &mut [f64]) -> Result<()> {
        self.check(rows.len())?;
        let w = self.width();
        for row in rows.chunks_exact_mut(w) {
            for (k, v) in row.iter_mut().enumerate() {
                let range = self.maxs[k] - self.mins[k];
                *v = if range > 0.0 {
                    (*v - self.mins[k]) / range
                } else {
                    0.0
                };
            }
        }
        Ok(())
    }

    pub fn apply(&self, rows: &[f64]) -> Result<Vec<f64>> {
        let mut out = rows.to_vec();
        self.apply_in_place(&mut out)?;
        Ok(out)
    }

    /// Inverse map; constant features return their fitted value.
    pub fn invert(&self, rows: &[f64]) -> Result<Vec<f64>> {
        self.check(rows.len())?;
        let w = self.width();
        let mut out = rows.to_vec();
        for row in out.chunks_exact_mut(w) {
            for (k, v) in row.iter_mut().enumerate() {
                *v = self.mins[k] + *v * (self.maxs[k] - self.mins[k]);
            }
        }
        Ok(out)
    }
}

/// Scalers for the inputs and the targets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormState {
    pub input: MinMaxScaler,
    pub target: MinMaxScaler,
}

impl NormState {
    pub fn fit(train: &Batch) -> Result<Self> {
        Ok(Self {
            input: MinMaxScaler::fit(train.inputs(), train.d_x())?,
            target: MinMaxScaler::fit(train.targets(), train.d_y())?,
        })
    }

    pub fn apply(&self, batch: &Batch) -> Result<Batch> {
        Batch::new(
            self.input.apply(batch.inputs())?,
            self.target.apply(batch.targets())?,
            batch.d_x(),
            batch.d_y(),
        )
    }
}
