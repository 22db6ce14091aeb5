//! Multilayer perceptron with ReLU hidden layers and a linear output layer,
//! trained with mean squared error. Gradients are derived by hand.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamVector;

/// A row-major set of supervised samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    d_x: usize,
    d_y: usize,
}

impl Batch {
    pub fn new(inputs: Vec<f64>, targets: Vec<f64>, d_x: usize, d_y: usize) -> Result<Self> {
        if d_x == 0 || d_y == 0 {
            return Err(Error::invalid("batch", "feature and target widths must be positive"));
        }
        if !inputs.len().is_multiple_of(d_x) {
            return Err(Error::Shape {
                what: "batch inputs (multiple of d_x)",
                expected: d_x,
                got: inputs.len(),
            });
        }
        let n = inputs.len() / d_x;
        if targets.len() != n * d_y {
            return Err(Error::Shape {
                what: "batch targets",
                expected: n * d_y,
                got: targets.len(),
            });
        }
        Ok(Self {
            inputs,
            targets,
            d_x,
            d_y,
        })
    }

    pub fn empty(d_x: usize, d_y: usize) -> Self {
        Self {
            inputs: Vec::new(),
            targets: Vec::new(),
            d_x,
            d_y,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.d_x
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn d_x(&self) -> usize {
        self.d_x
    }

    pub fn d_y(&self) -> usize {
        self.d_y
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.d_x..(i + 1) * self.d_x]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.d_y..(i + 1) * self.d_y]
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn inputs_mut(&mut self) -> &mut [f64] {
        &mut self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn push(&mut self, x: &[f64], y: &[f64]) {
        debug_assert_eq!(x.len(), self.d_x);
        debug_assert_eq!(y.len(), self.d_y);
        self.inputs.extend_from_slice(x);
        self.targets.extend_from_slice(y);
    }

    /// Rows selected by `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Batch {
        let mut out = Batch::empty(self.d_x, self.d_y);
        out.inputs.reserve(indices.len() * self.d_x);
        out.targets.reserve(indices.len() * self.d_y);
        for &i in indices {
            out.push(self.input(i), self.target(i));
        }
        out
    }

    pub fn concat(parts: &[&Batch]) -> Result<Batch> {
        let first = parts.first().ok_or(Error::EmptyBatch)?;
        let mut out = Batch::empty(first.d_x, first.d_y);
        for p in parts {
            if p.d_x != first.d_x || p.d_y != first.d_y {
                return Err(Error::Shape {
                    what: "batch feature width",
                    expected: first.d_x,
                    got: p.d_x,
                });
            }
            out.inputs.extend_from_slice(&p.inputs);
            out.targets.extend_from_slice(&p.targets);
        }
        Ok(out)
    }
}

fn check_input(params: &ParamVector, d_x: usize) -> Result<()> {
    if params.layers().is_empty() {
        return Err(Error::invalid("params", "model has no layers"));
    }
    if params.input_dim() != d_x {
        return Err(Error::Shape {
            what: "model input width",
            expected: params.input_dim(),
            got: d_x,
        });
    }
    Ok(())
}

/// Applies one dense layer: `out = W * input + b`.
fn dense(params: &ParamVector, layer: usize, input: &[f64], out: &mut Vec<f64>) {
    let shape = params.layers()[layer];
    let w = params.weight(layer);
    let b = params.bias(layer);
    out.clear();
    for r in 0..shape.rows {
        let row = &w[r * shape.cols..(r + 1) * shape.cols];
        let mut acc = b[r];
        for (wi, xi) in row.iter().zip(input) {
            acc += wi * xi;
        }
        out.push(acc);
    }
}

/// Network prediction for a single input vector.
pub fn mlp_forward(params: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    check_input(params, x.len())?;
    let n_layers = params.layers().len();
    let mut cur = x.to_vec();
    let mut next = Vec::new();
    for l in 0..n_layers {
        dense(params, l, &cur, &mut next);
        if l + 1 < n_layers {
            for v in &mut next {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        core::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// Predictions for every row of a batch, row-major `n x d_y`.
pub fn mlp_predict(params: &ParamVector, batch: &Batch) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(batch.len() * params.output_dim());
    for i in 0..batch.len() {
        out.extend(mlp_forward(params, batch.input(i))?);
    }
    Ok(out)
}

/// Mean over samples of the squared error `|y_hat - y|^2` and its exact
/// gradient with respect to every parameter.
pub fn mlp_loss_grad(params: &ParamVector, batch: &Batch) -> Result<(f64, ParamVector)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    check_input(params, batch.d_x())?;
    if params.output_dim() != batch.d_y() {
        return Err(Error::Shape {
            what: "model output width",
            expected: params.output_dim(),
            got: batch.d_y(),
        });
    }
    let layers = params.layers();
    let n_layers = layers.len();
    let n = batch.len();
    let inv_n = 1.0 / n as f64;
    let mut grad = ParamVector::zeros(layers);
    let offsets: Vec<usize> = (0..n_layers).map(|l| params.layer_offset(l)).collect();
    let mut loss = 0.0;

    // activations[l] is the input to layer l; activations[n_layers] the output
    let mut activations: Vec<Vec<f64>> = vec![Vec::new(); n_layers + 1];
    let mut delta = Vec::new();
    let mut prev_delta = Vec::new();

    for s in 0..n {
        activations[0].clear();
        activations[0].extend_from_slice(batch.input(s));
        for l in 0..n_layers {
            let (head, tail) = activations.split_at_mut(l + 1);
            dense(params, l, &head[l], &mut tail[0]);
            if l + 1 < n_layers {
                for v in tail[0].iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
        }
        let y = batch.target(s);
        delta.clear();
        for (p, t) in activations[n_layers].iter().zip(y) {
            let e = p - t;
            loss += e * e;
            delta.push(2.0 * e * inv_n);
        }
        for l in (0..n_layers).rev() {
            let shape = layers[l];
            let input = &activations[l];
            let off = offsets[l];
            let g = grad.values_mut();
            for r in 0..shape.rows {
                let d = delta[r];
                if d != 0.0 {
                    let row = &mut g[off + r * shape.cols..off + (r + 1) * shape.cols];
                    for (gi, xi) in row.iter_mut().zip(input) {
                        *gi += d * xi;
                    }
                }
                g[off + shape.weight_len() + r] += d;
            }
            if l > 0 {
                let w = params.weight(l);
                prev_delta.clear();
                prev_delta.resize(shape.cols, 0.0);
                for r in 0..shape.rows {
                    let d = delta[r];
                    if d != 0.0 {
                        let row = &w[r * shape.cols..(r + 1) * shape.cols];
                        for (pd, wi) in prev_delta.iter_mut().zip(row) {
                            *pd += wi * d;
                        }
                    }
                }
                // ReLU derivative, taken as 0 at the kink
                for (pd, a) in prev_delta.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *pd = 0.0;
                    }
                }
                core::mem::swap(&mut delta, &mut prev_delta);
            }
        }
    }
    let loss = loss * inv_n;
    if !loss.is_finite() || !grad.is_finite() {
        return Err(Error::NonFinite("loss gradient"));
    }
    Ok((loss, grad))
}

/// Mean squared error only (no gradient).
pub fn mlp_loss(params: &ParamVector, batch: &Batch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut loss = 0.0;
    for s in 0..batch.len() {
        let pred = mlp_forward(params, batch.input(s))?;
        for (p, t) in pred.iter().zip(batch.target(s)) {
            loss += (p - t) * (p - t);
        }
    }
    Ok(loss / batch.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::mlp_layers;
    use crate::rng::stream;
    use alloc::vec;
    use rand::Rng;

    fn linear(w: f64, b: f64) -> ParamVector {
        ParamVector::from_values(&mlp_layers(&[1, 1]), vec![w, b]).unwrap()
    }

    /// Straight-line two-layer forward pass written independently of `dense`.
    fn reference_forward(p: &ParamVector, x: &[f64]) -> Vec<f64> {
        let l0 = p.layers()[0];
        let l1 = p.layers()[1];
        let v = p.values();
        let mut hidden = vec![0.0; l0.rows];
        for (r, h) in hidden.iter_mut().enumerate() {
            let mut s = v[l0.rows * l0.cols + r];
            for c in 0..l0.cols {
                s += v[r * l0.cols + c] * x[c];
            }
            *h = s.max(0.0);
        }
        let base = l0.len();
        (0..l1.rows)
            .map(|r| {
                let mut s = v[base + l1.rows * l1.cols + r];
                for c in 0..l1.cols {
                    s += v[base + r * l1.cols + c] * hidden[c];
                }
                s
            })
            .collect()
    }

    fn random_batch(seed: u64, n: usize, d_x: usize, d_y: usize) -> Batch {
        let mut rng = stream(seed, 99, 0);
        let xs = (0..n * d_x).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ys = (0..n * d_y).map(|_| rng.random_range(-1.0..1.0)).collect();
        Batch::new(xs, ys, d_x, d_y).unwrap()
    }

    #[test]
    fn zero_params_give_zero_output() {
        let p = ParamVector::zeros(&mlp_layers(&[3, 4, 2]));
        assert_eq!(mlp_forward(&p, &[1.0, -2.0, 5.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_linear_layer() {
        let p = ParamVector::from_values(&mlp_layers(&[1, 1]), vec![2.0, 0.0]).unwrap();
        assert_eq!(mlp_forward(&p, &[3.0]).unwrap(), vec![6.0]);
    }

    #[test]
    fn two_layer_matches_reference() {
        let layers = mlp_layers(&[5, 7, 3]);
        let p = ParamVector::init_uniform(&layers, &mut stream(11, 0, 0));
        let x = [0.3, -0.7, 1.1, 0.05, -0.4];
        let got = mlp_forward(&p, &x).unwrap();
        let want = reference_forward(&p, &x);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-14, "{g} vs {w}");
        }
    }

    #[test]
    fn shape_error_on_wrong_input() {
        let p = ParamVector::zeros(&mlp_layers(&[3, 1]));
        assert!(matches!(mlp_forward(&p, &[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn loss_zero_at_exact_fit() {
        let p = linear(2.0, 1.0);
        let b = Batch::new(vec![0.0, 1.0, 2.0], vec![1.0, 3.0, 5.0], 1, 1).unwrap();
        let (loss, g) = mlp_loss_grad(&p, &b).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn hand_differentiated_linear_case() {
        let p = linear(1.0, 0.0);
        let b = Batch::new(vec![1.0], vec![3.0], 1, 1).unwrap();
        let (loss, g) = mlp_loss_grad(&p, &b).unwrap();
        assert_eq!(loss, 4.0);
        assert_eq!(g.values()[0], -4.0);
        assert_eq!(g.values()[1], -4.0);
    }

    #[test]
    fn empty_batch_is_error() {
        let p = linear(1.0, 0.0);
        assert_eq!(
            mlp_loss_grad(&p, &Batch::empty(1, 1)).unwrap_err(),
            Error::EmptyBatch
        );
    }

    #[test]
    fn non_finite_is_error() {
        let p = linear(f64::MAX, 0.0);
        let b = Batch::new(vec![f64::MAX], vec![0.0], 1, 1).unwrap();
        assert!(matches!(mlp_loss_grad(&p, &b), Err(Error::NonFinite(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let layers = mlp_layers(&[4, 6, 5, 2]);
        for seed in 0..100u64 {
            let p = ParamVector::init_uniform(&layers, &mut stream(seed, 1, 0));
            let b = random_batch(seed, 5, 4, 2);
            let (_, g) = mlp_loss_grad(&p, &b).unwrap();
            let h = 1e-5;
            let mut num = vec![0.0; p.dim()];
            for (i, slot) in num.iter_mut().enumerate() {
                let mut plus = p.clone();
                plus.values_mut()[i] += h;
                let mut minus = p.clone();
                minus.values_mut()[i] -= h;
                *slot = (mlp_loss(&plus, &b).unwrap() - mlp_loss(&minus, &b).unwrap()) / (2.0 * h);
            }
            let diff: f64 = g.values().iter().zip(&num).map(|(a, b)| (a - b) * (a - b)).sum();
            let scale: f64 = num.iter().map(|v| v * v).sum();
            let rel = libm::sqrt(diff) / libm::sqrt(scale).max(1e-12);
            assert!(rel <= 1e-4, "seed {seed}: relative error {rel}");
        }
    }

    #[test]
    fn forward_is_bit_reproducible() {
        let layers = mlp_layers(&[3, 8, 1]);
        let p = ParamVector::init_uniform(&layers, &mut stream(5, 0, 0));
        let b = random_batch(5, 10, 3, 1);
        let (l1, g1) = mlp_loss_grad(&p, &b).unwrap();
        let (l2, g2) = mlp_loss_grad(&p, &b).unwrap();
        assert_eq!(l1.to_bits(), l2.to_bits());
        assert_eq!(g1, g2);
    }
}
