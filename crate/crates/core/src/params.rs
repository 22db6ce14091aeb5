//! Flat parameter vectors with per-layer shape metadata, plus the small set
//! of dense vector operations the rest of the crate needs.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of one dense layer: a `rows x cols` weight matrix (`rows` outputs,
/// `cols` inputs) followed by a bias of length `rows`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub rows: usize,
    pub cols: usize,
}

impl LayerShape {
    pub const fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub const fn weight_len(&self) -> usize {
        self.rows * self.cols
    }

    pub const fn len(&self) -> usize {
        self.rows * self.cols + self.rows
    }
}

/// Layer shapes for an MLP with the given layer widths, input first.
pub fn mlp_layers(widths: &[usize]) -> Vec<LayerShape> {
    widths
        .windows(2)
        .map(|w| LayerShape::new(w[1], w[0]))
        .collect()
}

/// Model parameters stored as one contiguous buffer.
///
/// Layout per layer: row-major weights, then bias. `dim()` is always the sum
/// of the layer lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    values: Vec<f64>,
    layers: Vec<LayerShape>,
}

impl ParamVector {
    pub fn zeros(layers: &[LayerShape]) -> Self {
        let dim = layers.iter().map(LayerShape::len).sum();
        Self {
            values: vec![0.0; dim],
            layers: layers.to_vec(),
        }
    }

    pub fn from_values(layers: &[LayerShape], values: Vec<f64>) -> Result<Self> {
        let dim: usize = layers.iter().map(LayerShape::len).sum();
        if values.len() != dim {
            return Err(Error::Shape {
                what: "parameter values",
                expected: dim,
                got: values.len(),
            });
        }
        if layers.windows(2).any(|w| w[1].cols != w[0].rows) {
            return Err(Error::invalid("layers", "consecutive layer widths disagree"));
        }
        Ok(Self {
            values,
            layers: layers.to_vec(),
        })
    }

    /// Uniform(-r, r) initialization with `r = 1/sqrt(fan_in)` for both
    /// weights and biases.
    pub fn init_uniform<R: Rng + ?Sized>(layers: &[LayerShape], rng: &mut R) -> Self {
        let mut p = Self::zeros(layers);
        let mut offset = 0;
        for layer in layers {
            let r = 1.0 / libm::sqrt(layer.cols.max(1) as f64);
            for v in &mut p.values[offset..offset + layer.len()] {
                *v = rng.random_range(-r..r);
            }
            offset += layer.len();
        }
        p
    }

    /// Same layout, new contents.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::from_values(&self.layers, values)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.cols)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.rows)
    }

    pub fn same_layout(&self, other: &ParamVector) -> bool {
        self.layers == other.layers
    }

    pub(crate) fn layer_offset(&self, index: usize) -> usize {
        self.layers[..index].iter().map(LayerShape::len).sum()
    }

    pub fn weight(&self, index: usize) -> &[f64] {
        let off = self.layer_offset(index);
        &self.values[off..off + self.layers[index].weight_len()]
    }

    pub fn weight_mut(&mut self, index: usize) -> &mut [f64] {
        let off = self.layer_offset(index);
        let len = self.layers[index].weight_len();
        &mut self.values[off..off + len]
    }

    pub fn bias(&self, index: usize) -> &[f64] {
        let l = self.layers[index];
        let off = self.layer_offset(index) + l.weight_len();
        &self.values[off..off + l.rows]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.values, &self.values)
    }

    /// Projects onto the Euclidean ball of the given radius in place.
    pub fn project(&mut self, radius: f64) {
        project_ball_in_place(&mut self.values, radius);
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `y += alpha * x`
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Sign with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Euclidean projection onto `{x : |x| <= radius}`.
pub fn project_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    project_ball_in_place(&mut out, radius);
    out
}

pub fn project_ball_in_place(v: &mut [f64], radius: f64) {
    let n = norm(v);
    if n > radius {
        let s = radius / n;
        for x in v.iter_mut() {
            *x *= s;
        }
    }
}
