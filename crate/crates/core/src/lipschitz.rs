//! Lipschitz surrogate `G(w) = kappa * prod_l |W_l|_2` of the network map and
//! its gradient.
//!
//! Each spectral norm is estimated by power iteration; the top singular pair
//! `(u, v)` of layer `l` gives `d|W_l|_2 / dW_l = u v^T`. With ReLU hidden
//! layers and a linear output the product of spectral norms bounds the
//! Lipschitz constant of the whole network; `kappa` absorbs the loss layer.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{dot, norm, ParamVector};

/// Top singular triple of one weight matrix. `u` has `rows` entries, `v`
/// has `cols`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularPair {
    pub sigma: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    /// `G(w)`, always `>= 0`.
    pub value: f64,
    /// Gradient of `G` with the same layout as the parameters (zero on biases).
    pub grad: Vec<f64>,
    pub power_iters_used: usize,
    /// Per-layer singular pairs, reusable as the next warm start.
    pub warm_start: Vec<SingularPair>,
}

fn mat_vec(w: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        *o = dot(&w[r * cols..(r + 1) * cols], v);
    }
}

fn mat_t_vec(w: &[f64], rows: usize, cols: usize, u: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for r in 0..rows {
        let ur = u[r];
        if ur != 0.0 {
            for (o, wi) in out.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
                *o += wi * ur;
            }
        }
    }
}

/// Start vector: the largest-norm row of `W`, normalized. Never orthogonal
/// to the row space, so `W v != 0` whenever `W != 0`.
fn row_start(w: &[f64], rows: usize, cols: usize) -> Option<Vec<f64>> {
    let (best, best_norm) = (0..rows)
        .map(|r| (r, norm(&w[r * cols..(r + 1) * cols])))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    if best_norm == 0.0 {
        return None;
    }
    Some(w[best * cols..(best + 1) * cols].iter().map(|x| x / best_norm).collect())
}

fn top_singular_pair(
    w: &[f64],
    rows: usize,
    cols: usize,
    warm: Option<&SingularPair>,
    iters: usize,
) -> SingularPair {
    let mut v = match warm {
        Some(p) if p.v.len() == cols && norm(&p.v) > 0.0 => {
            let n = norm(&p.v);
            p.v.iter().map(|x| x / n).collect()
        }
        _ => match row_start(w, rows, cols) {
            Some(v) => v,
            None => {
                return SingularPair {
                    sigma: 0.0,
                    u: vec![0.0; rows],
                    v: vec![0.0; cols],
                }
            }
        },
    };
    let mut u = vec![0.0; rows];
    for _ in 0..iters {
        mat_vec(w, rows, cols, &v, &mut u);
        let nu = norm(&u);
        if nu == 0.0 {
            // a stale warm start can be orthogonal to the row space
            match row_start(w, rows, cols) {
                Some(s) => {
                    v = s;
                    continue;
                }
                None => break,
            }
        }
        u.iter_mut().for_each(|x| *x /= nu);
        mat_t_vec(w, rows, cols, &u, &mut v);
        let nv = norm(&v);
        if nv == 0.0 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= nv);
    }
    mat_vec(w, rows, cols, &v, &mut u);
    let sigma = norm(&u);
    if sigma == 0.0 {
        return SingularPair {
            sigma: 0.0,
            u: vec![0.0; rows],
            v: vec![0.0; cols],
        };
    }
    u.iter_mut().for_each(|x| *x /= sigma);
    SingularPair { sigma, u, v }
}

/// Value and gradient of `kappa * prod_l |W_l|_2`.
///
/// A zero weight matrix yields value 0 and a zero gradient.
pub fn lipschitz_value_grad(
    params: &ParamVector,
    kappa: f64,
    warm_start: Option<&[SingularPair]>,
    iters: usize,
) -> Result<LipschitzEstimate> {
    if iters == 0 {
        return Err(Error::invalid("iters", "power iteration needs at least one step"));
    }
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::invalid("kappa", "must be finite and nonnegative"));
    }
    let layers = params.layers();
    let pairs: Vec<SingularPair> = layers
        .iter()
        .enumerate()
        .map(|(l, shape)| {
            let warm = warm_start.and_then(|ws| ws.get(l));
            top_singular_pair(params.weight(l), shape.rows, shape.cols, warm, iters)
        })
        .collect();

    // prefix[l] = prod_{k<l} sigma_k, suffix[l] = prod_{k>l} sigma_k
    let n = pairs.len();
    let mut prefix = vec![1.0; n + 1];
    for l in 0..n {
        prefix[l + 1] = prefix[l] * pairs[l].sigma;
    }
    let mut suffix = vec![1.0; n + 1];
    for l in (0..n).rev() {
        suffix[l] = suffix[l + 1] * pairs[l].sigma;
    }
    let value = kappa * prefix[n];

    let mut grad = vec![0.0; params.dim()];
    for (l, pair) in pairs.iter().enumerate() {
        let others = kappa * prefix[l] * suffix[l + 1];
        if others == 0.0 || pair.sigma == 0.0 {
            continue;
        }
        let shape = layers[l];
        let off = params.layer_offset(l);
        for r in 0..shape.rows {
            let ur = others * pair.u[r];
            for c in 0..shape.cols {
                grad[off + r * shape.cols + c] = ur * pair.v[c];
            }
        }
    }
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("lipschitz surrogate"));
    }
    Ok(LipschitzEstimate {
        value,
        grad,
        power_iters_used: iters,
        warm_start: pairs,
    })
}
