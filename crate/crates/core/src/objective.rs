//! Regularized augmented Lagrangian of the federated robust problem and the
//! partial derivatives used by the primal-dual protocol.
//!
//! Per honest client `i`, with `M` the client count used for normalization:
//!
//! ```text
//! L = (1/M) sum_i [ g(w_i) + (eta_i + c3/eps_i) G(w_i) + lambda_i (eps_i - a)
//!                   + phi_i^T (z - w_i) + psi |z - w_i|_1 ]
//!     - sum_i (a1/2 lambda_i^2 + a2/2 |phi_i|^2)
//! ```
//!
//! `w` and `eps` descend, `z` descends, `lambda` and `phi` ascend. The
//! subgradient of the L1 consensus term with respect to `w_i` is
//! `-psi * sign(z - w_i)`, so the descent step pulls `w_i` toward `z`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lipschitz::LipschitzEstimate;
use crate::mlp::{mlp_loss_grad, Batch};
use crate::params::{project_ball, project_ball_in_place, sign, ParamVector};
use crate::privacy::Issue;

/// Step sizes, penalty weight, and the boundedness radii of the iterates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// L1 consensus penalty weight.
    pub psi: f64,
    pub step_omega: f64,
    pub step_eps: f64,
    pub step_z: f64,
    pub step_lambda: f64,
    pub step_phi: f64,
    /// `|w|^2, |z|^2 <= mu1`
    pub mu1: f64,
    /// `eps^2 <= mu2`
    pub mu2: f64,
    /// `lambda^2 <= mu3`
    pub mu3: f64,
    /// `|phi|^2 <= mu4`
    pub mu4: f64,
    /// Privacy budget cap `a`.
    pub budget: f64,
    pub epsilon_min: f64,
    /// Floors of the two regularization schedules.
    pub reg_floor_lambda: f64,
    pub reg_floor_phi: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            psi: 1e-2,
            step_omega: 1e-2,
            step_eps: 1e-2,
            step_z: 1e-2,
            step_lambda: 1e-2,
            step_phi: 1e-2,
            mu1: 1e3,
            mu2: 1e4,
            mu3: 1e2,
            mu4: 1e2,
            budget: 1.0,
            epsilon_min: 1e-2,
            reg_floor_lambda: 0.0,
            reg_floor_phi: 0.0,
        }
    }
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

fn nonneg(x: f64) -> bool {
    x >= 0.0 && x.is_finite()
}

impl HyperParams {
    /// Constraint violations. `psi` and `step_phi` may be zero, which
    /// switches off the consensus coupling for degenerate single-node runs.
    pub fn issues(&self) -> Vec<Issue> {
        let mut out = Vec::new();
        if !nonneg(self.psi) {
            out.push(Issue::new("psi", "must be nonnegative"));
        }
        for (name, v) in [
            ("step_omega", self.step_omega),
            ("step_eps", self.step_eps),
            ("step_z", self.step_z),
            ("step_lambda", self.step_lambda),
        ] {
            if !positive(v) {
                out.push(Issue::new(name, "step size must be positive"));
            }
        }
        if !nonneg(self.step_phi) {
            out.push(Issue::new("step_phi", "step size must be nonnegative"));
        }
        for (name, v) in [
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("mu3", self.mu3),
            ("mu4", self.mu4),
        ] {
            if !positive(v) {
                out.push(Issue::new(name, "bound must be positive"));
            }
        }
        if !positive(self.epsilon_min) {
            out.push(Issue::new("epsilon_min", "must be positive"));
        }
        if !(positive(self.budget) && self.budget > self.epsilon_min) {
            out.push(Issue::new("budget_a", "must exceed epsilon_min"));
        }
        if positive(self.mu2) && libm::sqrt(self.mu2) < self.epsilon_min {
            out.push(Issue::new("mu2", "sqrt(mu2) must be at least epsilon_min"));
        }
        if !nonneg(self.reg_floor_lambda) {
            out.push(Issue::new("reg_floor_lambda", "must be nonnegative"));
        }
        if !nonneg(self.reg_floor_phi) {
            out.push(Issue::new("reg_floor_phi", "must be nonnegative"));
        }
        out
    }

    pub fn lambda_schedule(&self) -> RegSchedule {
        RegSchedule {
            alpha: self.step_lambda,
            floor: self.reg_floor_lambda,
        }
    }

    pub fn phi_schedule(&self) -> RegSchedule {
        RegSchedule {
            alpha: self.step_phi,
            floor: self.reg_floor_phi,
        }
    }

    pub fn lambda_cap(&self) -> f64 {
        libm::sqrt(self.mu3)
    }

    pub fn phi_radius(&self) -> f64 {
        libm::sqrt(self.mu4)
    }

    pub fn param_radius(&self) -> f64 {
        libm::sqrt(self.mu1)
    }

    pub fn eps_max(&self) -> f64 {
        libm::sqrt(self.mu2)
    }

    pub fn clamp_eps(&self, eps: f64) -> f64 {
        eps.max(self.epsilon_min).min(self.eps_max())
    }
}

/// Non-increasing regularization sequence `max(floor, (alpha (t+1))^(-1/4))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegSchedule {
    pub alpha: f64,
    pub floor: f64,
}

pub fn reg_value(sched: RegSchedule, t: u64) -> f64 {
    if sched.alpha <= 0.0 {
        return sched.floor;
    }
    let v = libm::pow(sched.alpha * (t as f64 + 1.0), -0.25);
    v.max(sched.floor)
}

/// Dual variables held for one client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambda: f64,
    pub phi: Vec<f64>,
}

/// Assembles `(1/M)(grad_g + rho * grad_G - phi - psi * sign(z - w))`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_omega_grad(
    loss_grad: &[f64],
    rho: f64,
    lipschitz_grad: &[f64],
    phi: &[f64],
    z: &[f64],
    omega: &[f64],
    psi: f64,
    m: usize,
) -> Vec<f64> {
    let inv_m = 1.0 / m as f64;
    let mut out = Vec::with_capacity(loss_grad.len());
    for k in 0..loss_grad.len() {
        let mut g = loss_grad[k];
        if rho != 0.0 {
            g += rho * lipschitz_grad[k];
        }
        g -= phi[k];
        if psi != 0.0 {
            g -= psi * sign(z[k] - omega[k]);
        }
        out.push(inv_m * g);
    }
    out
}

/// Descent direction for a client's model on a (noisy) batch. Returns the
/// batch loss alongside the direction.
#[allow(clippy::too_many_arguments)]
pub fn omega_grad(
    omega: &ParamVector,
    noisy_batch: &Batch,
    rho: f64,
    lipschitz: &LipschitzEstimate,
    phi: &[f64],
    z: &ParamVector,
    psi: f64,
    m: usize,
) -> Result<(f64, ParamVector)> {
    if !omega.same_layout(z) {
        return Err(Error::invalid("z", "layout differs from the client model"));
    }
    let dim = omega.dim();
    for (what, len) in [("phi", phi.len()), ("lipschitz gradient", lipschitz.grad.len())] {
        if len != dim {
            return Err(Error::Shape {
                what,
                expected: dim,
                got: len,
            });
        }
    }
    if !(rho >= 0.0) {
        return Err(Error::invalid("rho", "radius must be nonnegative"));
    }
    if m == 0 {
        return Err(Error::invalid("m", "client count must be positive"));
    }
    let (loss, g) = mlp_loss_grad(omega, noisy_batch)?;
    let dir = assemble_omega_grad(
        g.values(),
        rho,
        &lipschitz.grad,
        phi,
        z.values(),
        omega.values(),
        psi,
        m,
    );
    if dir.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("omega gradient"));
    }
    Ok((loss, omega.with_values(dir)?))
}

/// `(1/M)(-c3 G / eps^2 + lambda)`.
pub fn epsilon_grad(eps: f64, g_val: f64, lambda: f64, c3: f64, m: usize) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", "privacy level must be positive"));
    }
    let v = (-c3 * g_val / (eps * eps) + lambda) / m as f64;
    if !v.is_finite() {
        return Err(Error::NonFinite("epsilon gradient"));
    }
    Ok(v)
}

/// `(1/M) sum_r (phi_r + psi * sign(z - w_r))` over every client record.
pub fn z_grad<'a, I>(records: I, z: &[f64], psi: f64, m: usize) -> Vec<f64>
where
    I: IntoIterator<Item = (&'a [f64], &'a [f64])>,
{
    let mut acc = vec![0.0; z.len()];
    for (omega, phi) in records {
        for k in 0..z.len() {
            acc[k] += phi[k];
            if psi != 0.0 {
                acc[k] += psi * sign(z[k] - omega[k]);
            }
        }
    }
    let inv_m = 1.0 / m as f64;
    acc.iter_mut().for_each(|v| *v *= inv_m);
    acc
}

/// Projected ascent on the budget dual:
/// `clip(lambda + alpha_lambda ((eps - a) - a1 lambda), 0, sqrt(mu3))`.
pub fn lambda_step(lambda: f64, eps: f64, reg: f64, hp: &HyperParams) -> f64 {
    let next = lambda + hp.step_lambda * ((eps - hp.budget) - reg * lambda);
    next.max(0.0).min(hp.lambda_cap())
}

/// Projected ascent on the consensus dual:
/// `P_{sqrt(mu4)}(phi + alpha_phi ((z - w) - a2 phi))`.
pub fn phi_step(phi: &[f64], z: &[f64], omega: &[f64], reg: f64, hp: &HyperParams) -> Vec<f64> {
    let mut next: Vec<f64> = phi
        .iter()
        .zip(z.iter().zip(omega))
        .map(|(p, (zk, wk))| p + hp.step_phi * ((zk - wk) - reg * p))
        .collect();
    project_ball_in_place(&mut next, hp.phi_radius());
    next
}

/// Everything the stationarity map needs about one client.
#[derive(Debug, Clone, Copy)]
pub struct ClientResidualInput<'a> {
    pub omega: &'a [f64],
    /// Gradient of the client's empirical loss at `omega`.
    pub loss_grad: &'a [f64],
    pub lipschitz: &'a LipschitzEstimate,
    pub eta: f64,
    pub eps: f64,
    pub lambda: f64,
    pub phi: &'a [f64],
}

#[derive(Debug, Clone, Copy)]
pub struct StationarityInput<'a> {
    pub clients: &'a [ClientResidualInput<'a>],
    /// `(omega, phi)` of clients that enter the z-gradient but are not
    /// themselves evaluated (e.g. records held for Byzantine senders).
    pub extra_records: &'a [(&'a [f64], &'a [f64])],
    pub z: &'a [f64],
    pub t: u64,
    pub hp: &'a HyperParams,
    pub c3: f64,
    /// Normalizing client count.
    pub m: usize,
    /// When false the privacy variables are frozen: the noise radius is
    /// dropped from `rho` and the eps/lambda residuals are omitted.
    pub privacy_active: bool,
    /// When false `rho` is zero.
    pub robust_active: bool,
}

/// Squared norm of the stacked primal-dual residuals.
///
/// Every block uses the projected-gradient residual `(x - P(x - a g)) / a`,
/// which equals the plain gradient away from the projection boundaries.
pub fn stationarity_gap(input: &StationarityInput<'_>) -> f64 {
    let hp = input.hp;
    let a1 = reg_value(hp.lambda_schedule(), input.t);
    let a2 = reg_value(hp.phi_schedule(), input.t);
    let mut total = 0.0;

    for c in input.clients {
        let rho = if !input.robust_active {
            0.0
        } else if input.privacy_active {
            c.eta + input.c3 / c.eps
        } else {
            c.eta
        };
        let g = assemble_omega_grad(
            c.loss_grad,
            rho,
            &c.lipschitz.grad,
            c.phi,
            input.z,
            c.omega,
            hp.psi,
            input.m,
        );
        let mut stepped: Vec<f64> = c
            .omega
            .iter()
            .zip(&g)
            .map(|(w, gk)| w - hp.step_omega * gk)
            .collect();
        project_ball_in_place(&mut stepped, hp.param_radius());
        total += c
            .omega
            .iter()
            .zip(&stepped)
            .map(|(w, s)| {
                let r = (w - s) / hp.step_omega;
                r * r
            })
            .sum::<f64>();

        if input.privacy_active {
            let ge = (-input.c3 * c.lipschitz.value / (c.eps * c.eps) + c.lambda) / input.m as f64;
            let stepped = hp.clamp_eps(c.eps - hp.step_eps * ge);
            let r = (c.eps - stepped) / hp.step_eps;
            total += r * r;

            let r = (c.lambda - lambda_step(c.lambda, c.eps, a1, hp)) / hp.step_lambda;
            total += r * r;
        }

        if hp.step_phi > 0.0 {
            let next = phi_step(c.phi, input.z, c.omega, a2, hp);
            total += c
                .phi
                .iter()
                .zip(&next)
                .map(|(p, q)| {
                    let r = (p - q) / hp.step_phi;
                    r * r
                })
                .sum::<f64>();
        }
    }

    let records = input
        .clients
        .iter()
        .map(|c| (c.omega, c.phi))
        .chain(input.extra_records.iter().copied());
    let gz = z_grad(records, input.z, hp.psi, input.m);
    let mut stepped: Vec<f64> = input
        .z
        .iter()
        .zip(&gz)
        .map(|(z, g)| z - hp.step_z * g)
        .collect();
    project_ball_in_place(&mut stepped, hp.param_radius());
    total += input
        .z
        .iter()
        .zip(&stepped)
        .map(|(z, s)| {
            let r = (z - s) / hp.step_z;
            r * r
        })
        .sum::<f64>();
    total
}

/// Projects a received dual vector onto the `sqrt(mu4)` ball.
pub fn sanitize_phi(phi: &[f64], hp: &HyperParams) -> Vec<f64> {
    project_ball(phi, hp.phi_radius())
}
