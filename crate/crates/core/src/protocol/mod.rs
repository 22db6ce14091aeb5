//! Asynchronous primal-dual protocol: client and server state machines, the
//! FedAvg baseline, and a virtual-clock event simulator.

mod client;
mod delay;
mod fedavg;
mod server;
mod sim;

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

pub use client::{client_dual_step, client_local_step, draw_minibatch, ClientState, LocalStep};
pub use delay::DelayModel;
pub use fedavg::fedavg_aggregate;
pub use server::{server_aggregate_step, Broadcast, ClientRecord, ServerState};
pub use sim::{simulate, Simulation, SyncReference};

use crate::adversary::AttackSpec;
use crate::error::{Error, Result};
use crate::objective::HyperParams;
use crate::params::ParamVector;
use crate::privacy::{Issue, PrivacyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Asynchronous, quorum `S`.
    Bafdp,
    /// Synchronous, quorum `R`.
    Bsfdp,
    /// Weighted model averaging without privacy or robustness.
    Fedavg,
    /// L1-consensus robustness only: no noise, no Lipschitz term, frozen
    /// privacy levels.
    RsaNoDp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Bafdp, Method::Bsfdp, Method::Fedavg, Method::RsaNoDp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bafdp => "bafdp",
            Method::Bsfdp => "bsfdp",
            Method::Fedavg => "fedavg",
            Method::RsaNoDp => "rsa_no_dp",
        }
    }

    pub fn privacy_active(self) -> bool {
        matches!(self, Method::Bafdp | Method::Bsfdp)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid("protocol.method", alloc::format!("unknown method `{s}`")))
    }
}

/// Which events are written to the trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceDetail {
    /// Every client, server, dual, and eval event.
    #[default]
    Full,
    /// Server and eval events only.
    Server,
}

/// Everything the simulator needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub method: Method,
    /// `R`, honest plus Byzantine.
    pub n_clients: usize,
    /// `B`; the last `B` client ids are Byzantine.
    pub n_byzantine: usize,
    /// `S`; forced to `R` for the synchronous method.
    pub quorum: usize,
    /// Server iterations `T`.
    pub iterations: u64,
    pub hp: HyperParams,
    /// `dim` must equal `d_x + d_y` of the data.
    pub privacy: PrivacyConfig,
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    pub kappa: f64,
    pub power_iters: usize,
    /// Minibatch size; 0 uses all local samples.
    pub batch_size: usize,
    pub eval_every: u64,
    /// Stationarity is measured every `gap_every` iterations (0: never).
    pub gap_every: u64,
    /// Stop once the measured gap is at or below this value.
    pub gap_target: Option<f64>,
    pub attack: Option<AttackSpec>,
    /// One delay model per client.
    pub delays: Vec<DelayModel>,
    pub detail: TraceDetail,
}

impl ProtocolConfig {
    pub fn effective_quorum(&self) -> usize {
        if self.method == Method::Bsfdp {
            self.n_clients
        } else {
            self.quorum
        }
    }

    pub fn honest(&self, id: usize) -> bool {
        id < self.n_clients - self.n_byzantine.min(self.n_clients)
    }

    pub fn issues(&self) -> Vec<Issue> {
        let mut out = self.hp.issues();
        out.extend(self.privacy.issues());
        if self.n_clients == 0 {
            out.push(Issue::new("R", "need at least one client"));
        }
        if self.n_byzantine >= self.n_clients && self.n_clients > 0 {
            out.push(Issue::new("B", "need at least one honest client"));
        }
        if self.quorum == 0 || self.quorum > self.n_clients {
            out.push(Issue::new("S", "quorum must satisfy 1 <= S <= R"));
        }
        if self.iterations == 0 {
            out.push(Issue::new("T", "need at least one iteration"));
        }
        if self.hidden.contains(&0) {
            out.push(Issue::new("hidden", "layer widths must be positive"));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            out.push(Issue::new("kappa", "must be finite and nonnegative"));
        }
        if self.power_iters == 0 {
            out.push(Issue::new("power_iters", "need at least one power iteration"));
        }
        if self.eval_every == 0 {
            out.push(Issue::new("eval_every", "must be positive"));
        }
        if self.gap_target.is_some_and(|g| !(g >= 0.0)) {
            out.push(Issue::new("gap_target", "must be nonnegative"));
        }
        if self.n_byzantine > 0 && self.attack.is_none() {
            out.push(Issue::new("attack", "Byzantine clients need an attack"));
        }
        if let Some(a) = &self.attack {
            if a.validate().is_err() {
                out.push(Issue::new("attack.scale", "must be finite"));
            }
        }
        if self.delays.len() != self.n_clients {
            out.push(Issue::new("delays", "need one delay model per client"));
        }
        for d in &self.delays {
            if let Err(e) = d.validate() {
                out.push(Issue::new("delays", alloc::format!("{e}")));
                break;
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.issues().first() {
            None => Ok(()),
            Some(i) => Err(Error::InvalidParameter {
                name: i.field,
                reason: i.message.clone(),
            }),
        }
    }
}

/// What a client sends after its local step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadMessage {
    pub client_id: usize,
    pub omega: ParamVector,
    pub eps: f64,
    pub phi: Vec<f64>,
    pub sent_at: f64,
}
