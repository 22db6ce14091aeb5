use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{DelayModel, Method, ProtocolConfig, UploadMessage};
use crate::error::{Error, Result};
use crate::lipschitz::{lipschitz_value_grad, LipschitzEstimate, SingularPair};
use crate::mlp::{mlp_loss_grad, Batch};
use crate::objective::{epsilon_grad, omega_grad, phi_step, reg_value};
use crate::params::ParamVector;
use crate::privacy::perturb_batch;
use crate::rng::{purpose, stream, StreamRng};

/// One participant's local state.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub omega: ParamVector,
    pub eps: f64,
    pub phi: Vec<f64>,
    /// Server iteration of the last completed dual step.
    pub last_activation: u64,
    pub honest: bool,
    pub delay: DelayModel,
    /// Concentration part of the Wasserstein radius.
    pub eta: f64,
    /// Latest broadcast received.
    pub view_z: ParamVector,
    pub view_lambda: f64,
    pub activations: u64,
    data_rng: StreamRng,
    delay_rng: StreamRng,
    attack_rng: StreamRng,
    warm: Vec<SingularPair>,
}

impl ClientState {
    pub fn new(
        id: usize,
        init: &ParamVector,
        eps: f64,
        eta: f64,
        honest: bool,
        delay: DelayModel,
        seed: u64,
    ) -> Self {
        Self {
            id,
            omega: init.clone(),
            eps,
            phi: vec![0.0; init.dim()],
            last_activation: 0,
            honest,
            delay,
            eta,
            view_z: init.clone(),
            view_lambda: 0.0,
            activations: 0,
            data_rng: stream(seed, purpose::CLIENT_DATA, id as u64),
            delay_rng: stream(seed, purpose::CLIENT_DELAY, id as u64),
            attack_rng: stream(seed, purpose::ATTACK, id as u64),
            warm: Vec::new(),
        }
    }

    pub fn draw_delay(&mut self) -> f64 {
        self.delay.sample(&mut self.delay_rng)
    }

    pub fn attack_rng(&mut self) -> &mut StreamRng {
        &mut self.attack_rng
    }

    /// Lipschitz surrogate at the current model, warm-started from the last
    /// local step without updating the stored warm start.
    pub fn lipschitz(&self, kappa: f64, iters: usize) -> Result<LipschitzEstimate> {
        let warm = (!self.warm.is_empty()).then_some(self.warm.as_slice());
        lipschitz_value_grad(&self.omega, kappa, warm, iters)
    }
}

/// Rows drawn uniformly with replacement; the whole batch when `size` is 0
/// or at least the batch length (no draws in that case).
pub fn draw_minibatch<R: Rng + ?Sized>(data: &Batch, size: usize, rng: &mut R) -> Batch {
    let n = data.len();
    if size == 0 || size >= n {
        return data.clone();
    }
    let idx: Vec<usize> = (0..size).map(|_| rng.random_range(0..n)).collect();
    data.select(&idx)
}

/// Result of a local step.
#[derive(Debug, Clone)]
pub struct LocalStep {
    pub message: UploadMessage,
    /// Loss on the (noisy) minibatch before the update.
    pub loss: f64,
    /// Privacy level that set the noise of this step.
    pub eps_used: f64,
}

fn zero_estimate(dim: usize) -> LipschitzEstimate {
    LipschitzEstimate {
        value: 0.0,
        grad: vec![0.0; dim],
        power_iters_used: 0,
        warm_start: Vec::new(),
    }
}

/// Primal step of an activated client against its latest broadcast.
pub fn client_local_step(
    client: &mut ClientState,
    data: &Batch,
    cfg: &ProtocolConfig,
    now: f64,
) -> Result<LocalStep> {
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let hp = &cfg.hp;
    let m = cfg.n_clients;
    let batch = draw_minibatch(data, cfg.batch_size, &mut client.data_rng);
    let eps_used = client.eps;
    client.activations += 1;

    let loss = if cfg.method == Method::Fedavg {
        client.omega = client.view_z.clone();
        let (loss, g) = mlp_loss_grad(&client.omega, &batch)?;
        for (w, gk) in client.omega.values_mut().iter_mut().zip(g.values()) {
            *w -= hp.step_omega * gk;
        }
        loss
    } else {
        let privacy = cfg.method.privacy_active();
        let c3 = cfg.privacy.c3();
        let (sigma, rho) = if privacy {
            let sigma = c3 / client.eps;
            (sigma, client.eta + sigma)
        } else {
            (0.0, 0.0)
        };
        let noisy = perturb_batch(&batch, sigma, &mut client.data_rng);
        let lip = if privacy {
            let est = client.lipschitz(cfg.kappa, cfg.power_iters)?;
            client.warm = est.warm_start.clone();
            est
        } else {
            zero_estimate(client.omega.dim())
        };
        let (loss, dir) = omega_grad(
            &client.omega,
            &noisy,
            rho,
            &lip,
            &client.phi,
            &client.view_z,
            hp.psi,
            m,
        )?;
        for (w, d) in client.omega.values_mut().iter_mut().zip(dir.values()) {
            *w -= hp.step_omega * d;
        }
        client.omega.project(hp.param_radius());
        if privacy {
            let g = epsilon_grad(client.eps, lip.value, client.view_lambda, c3, m)?;
            client.eps = hp.clamp_eps(client.eps - hp.step_eps * g);
        }
        loss
    };
    if !client.omega.is_finite() || !client.eps.is_finite() {
        return Err(Error::NonFinite("client update"));
    }
    Ok(LocalStep {
        message: UploadMessage {
            client_id: client.id,
            omega: client.omega.clone(),
            eps: client.eps,
            phi: client.phi.clone(),
            sent_at: now,
        },
        loss,
        eps_used,
    })
}

/// Dual step of a quorum member on receipt of the new broadcast. `t` is the
/// index of the server iteration that produced it.
pub fn client_dual_step(
    client: &mut ClientState,
    z: &ParamVector,
    lambda: f64,
    t: u64,
    cfg: &ProtocolConfig,
) {
    if cfg.method != Method::Fedavg && cfg.hp.step_phi > 0.0 {
        let a2 = reg_value(cfg.hp.phi_schedule(), t);
        client.phi = phi_step(&client.phi, z.values(), client.omega.values(), a2, &cfg.hp);
    }
    client.view_z = z.clone();
    client.view_lambda = lambda;
    client.last_activation = t + 1;
}
