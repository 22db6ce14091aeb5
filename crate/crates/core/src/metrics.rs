//! Forecast error metrics and communication accounting.

use crate::error::{Error, Result};

fn check(targets: &[f64], preds: &[f64]) -> Result<()> {
    if targets.len() != preds.len() {
        return Err(Error::Shape {
            what: "predictions",
            expected: targets.len(),
            got: preds.len(),
        });
    }
    if targets.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(())
}

/// Root mean square error.
pub fn rmse(targets: &[f64], preds: &[f64]) -> Result<f64> {
    check(targets, preds)?;
    let s: f64 = targets
        .iter()
        .zip(preds)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    Ok(libm::sqrt(s / targets.len() as f64))
}

/// Mean absolute error.
pub fn mae(targets: &[f64], preds: &[f64]) -> Result<f64> {
    check(targets, preds)?;
    let s: f64 = targets.iter().zip(preds).map(|(y, p)| (y - p).abs()).sum();
    Ok(s / targets.len() as f64)
}

/// Upload plus broadcast of one model per participant per round.
pub const fn comm_volume(model_bytes: u64, participants: u64, rounds: u64) -> u64 {
    2 * model_bytes * participants * rounds
}
