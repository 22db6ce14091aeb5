use crate::error::{Error, Result};
use crate::params::ParamVector;

/// Sample-count weighted mean of parameter vectors.
pub fn fedavg_aggregate(messages: &[&ParamVector], weights: &[f64]) -> Result<ParamVector> {
    let first = messages.first().ok_or(Error::EmptyBatch)?;
    if weights.len() != messages.len() {
        return Err(Error::Shape {
            what: "fedavg weights",
            expected: messages.len(),
            got: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("weights", "need nonnegative weights with a positive sum"));
    }
    let mut acc = alloc::vec![0.0; first.dim()];
    for (m, w) in messages.iter().zip(weights) {
        if !m.same_layout(first) {
            return Err(Error::invalid("messages", "parameter layouts differ"));
        }
        for (a, v) in acc.iter_mut().zip(m.values()) {
            *a += w * v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    first.with_values(acc)
}
