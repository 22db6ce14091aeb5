use alloc::vec;
use alloc::vec::Vec;

use super::{fedavg_aggregate, Method, ProtocolConfig, UploadMessage};
use crate::error::{Error, Result};
use crate::objective::{lambda_step, reg_value, sanitize_phi, z_grad};
use crate::params::ParamVector;

/// Last known upload of one client plus its budget dual.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientRecord {
    pub omega: Vec<f64>,
    /// Projected onto the `sqrt(mu4)` ball on receipt.
    pub phi: Vec<f64>,
    pub eps: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub z: ParamVector,
    /// One record per client id, seeded from the initial broadcast.
    pub records: Vec<ClientRecord>,
    /// Sample counts used as FedAvg weights.
    pub sample_counts: Vec<usize>,
    /// Uploads waiting for the quorum.
    pub buffer: Vec<UploadMessage>,
    pub t: u64,
    pub clock: f64,
    pub quorum: usize,
}

/// New global model and budget dual for one quorum member.
#[derive(Debug, Clone, PartialEq)]
pub struct Broadcast {
    pub client_id: usize,
    pub z: ParamVector,
    pub lambda: f64,
}

impl ServerState {
    pub fn new(init: &ParamVector, eps0: f64, sample_counts: Vec<usize>, quorum: usize) -> Self {
        let record = ClientRecord {
            omega: init.values().to_vec(),
            phi: vec![0.0; init.dim()],
            eps: eps0,
            lambda: 0.0,
        };
        Self {
            z: init.clone(),
            records: vec![record; sample_counts.len()],
            sample_counts,
            buffer: Vec::new(),
            t: 0,
            clock: 0.0,
            quorum,
        }
    }

    /// Buffers an upload; a second upload from the same client replaces the
    /// first. Returns true once `quorum` distinct clients are waiting.
    pub fn receive(&mut self, msg: UploadMessage) -> Result<bool> {
        if msg.client_id >= self.records.len() {
            return Err(Error::UnknownClient(msg.client_id));
        }
        match self.buffer.iter_mut().find(|m| m.client_id == msg.client_id) {
            Some(slot) => *slot = msg,
            None => self.buffer.push(msg),
        }
        Ok(self.buffer.len() >= self.quorum)
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lambda).collect()
    }

    pub fn eps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.eps).collect()
    }
}

/// Non-finite coordinates are replaced by the current consensus value, so
/// they contribute nothing to the sign sums.
fn sanitize_omega(omega: &ParamVector, z: &ParamVector) -> Vec<f64> {
    omega
        .values()
        .iter()
        .zip(z.values())
        .map(|(w, zk)| if w.is_finite() { *w } else { *zk })
        .collect()
}

/// Consensus and budget-dual update once the quorum is complete.
///
/// Returns broadcasts for exactly the quorum members, in upload order. With
/// fewer than `S` uploads this is a no-op returning no broadcasts.
pub fn server_aggregate_step(
    server: &mut ServerState,
    quorum: &[UploadMessage],
    cfg: &ProtocolConfig,
) -> Result<Vec<Broadcast>> {
    if quorum.len() < server.quorum {
        return Ok(Vec::new());
    }
    let hp = &cfg.hp;
    let dim = server.z.dim();
    for msg in quorum {
        if msg.omega.dim() != dim || msg.phi.len() != dim {
            return Err(Error::Shape {
                what: "upload",
                expected: dim,
                got: msg.omega.dim(),
            });
        }
    }
    if cfg.method == Method::Fedavg {
        let models: Vec<&ParamVector> = quorum.iter().map(|m| &m.omega).collect();
        let weights: Vec<f64> = quorum
            .iter()
            .map(|m| server.sample_counts[m.client_id] as f64)
            .collect();
        server.z = fedavg_aggregate(&models, &weights)?;
        for msg in quorum {
            server.records[msg.client_id].omega = msg.omega.values().to_vec();
        }
    } else {
        for msg in quorum {
            let rec = &mut server.records[msg.client_id];
            rec.omega = sanitize_omega(&msg.omega, &server.z);
            rec.phi = sanitize_phi(&msg.phi, hp);
            rec.phi.iter_mut().for_each(|p| {
                if !p.is_finite() {
                    *p = 0.0;
                }
            });
            rec.eps = if msg.eps.is_finite() {
                msg.eps
            } else {
                hp.epsilon_min
            };
        }
        let records = server
            .records
            .iter()
            .map(|r| (r.omega.as_slice(), r.phi.as_slice()));
        let gz = z_grad(records, server.z.values(), hp.psi, cfg.n_clients);
        for (zk, g) in server.z.values_mut().iter_mut().zip(&gz) {
            *zk -= hp.step_z * g;
        }
        server.z.project(hp.param_radius());
        if cfg.method.privacy_active() {
            let a1 = reg_value(hp.lambda_schedule(), server.t);
            for msg in quorum {
                let rec = &mut server.records[msg.client_id];
                rec.lambda = lambda_step(rec.lambda, rec.eps, a1, hp);
            }
        }
    }
    if !server.z.is_finite() {
        return Err(Error::NonFinite("consensus update"));
    }
    server.t += 1;
    Ok(quorum
        .iter()
        .map(|m| Broadcast {
            client_id: m.client_id,
            z: server.z.clone(),
            lambda: server.records[m.client_id].lambda,
        })
        .collect())
}
