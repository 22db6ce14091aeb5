use alloc::collections::BinaryHeap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use super::{
    client_dual_step, client_local_step, server_aggregate_step, ClientState, Method,
    ProtocolConfig, ServerState, TraceDetail, UploadMessage,
};
use crate::adversary::attack_message;
use crate::data::FederatedData;
use crate::error::{Error, Result};
use crate::lipschitz::LipschitzEstimate;
use crate::metrics::{comm_volume, mae, rmse};
use crate::mlp::{mlp_loss, mlp_loss_grad, mlp_predict, Batch};
use crate::objective::{stationarity_gap, ClientResidualInput, StationarityInput};
use crate::params::{mlp_layers, ParamVector};
use crate::privacy::eta_radius;
use crate::rng::{purpose, stream};
use crate::trace::{EventKind, TraceEvent, TrainingTrace};

#[derive(Debug, Clone, Copy)]
struct Pending {
    time: f64,
    client: usize,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.client.cmp(&other.client))
    }
}

fn check_inputs(cfg: &ProtocolConfig, data: &FederatedData) -> Result<()> {
    cfg.validate()?;
    if data.clients.len() != cfg.n_clients {
        return Err(Error::Shape {
            what: "client datasets",
            expected: cfg.n_clients,
            got: data.clients.len(),
        });
    }
    let d = data.d_x() + data.d_y();
    if cfg.privacy.dim != d {
        return Err(Error::Shape {
            what: "privacy dimension d_x + d_y",
            expected: d,
            got: cfg.privacy.dim,
        });
    }
    if data.clients.iter().any(Batch::is_empty) {
        return Err(Error::EmptyBatch);
    }
    Ok(())
}

/// Common initial state: `w0 = z0` uniform in `+-1/sqrt(fan_in)`,
/// `eps0 = epsilon_min`, zero duals.
fn initial_state(
    cfg: &ProtocolConfig,
    data: &FederatedData,
    seed: u64,
) -> Result<(Vec<ClientState>, ServerState)> {
    check_inputs(cfg, data)?;
    let mut widths = vec![data.d_x()];
    widths.extend_from_slice(&cfg.hidden);
    widths.push(data.d_y());
    let layers = mlp_layers(&widths);
    let init = ParamVector::init_uniform(&layers, &mut stream(seed, purpose::INIT, 0));
    let eps0 = cfg.hp.epsilon_min;
    let mut clients = Vec::with_capacity(cfg.n_clients);
    for (id, batch) in data.clients.iter().enumerate() {
        let eta = eta_radius(batch.len(), &cfg.privacy)?;
        clients.push(ClientState::new(
            id,
            &init,
            eps0,
            eta,
            cfg.honest(id),
            cfg.delays[id],
            seed,
        ));
    }
    let counts = data.clients.iter().map(Batch::len).collect();
    let server = ServerState::new(&init, eps0, counts, cfg.effective_quorum());
    Ok((clients, server))
}

fn local_and_forge(
    client: &mut ClientState,
    data: &Batch,
    cfg: &ProtocolConfig,
    now: f64,
) -> Result<(UploadMessage, f64, f64)> {
    let step = client_local_step(client, data, cfg, now)?;
    let msg = match (&cfg.attack, client.honest) {
        (Some(spec), false) => {
            let t = client.last_activation;
            let z = client.view_z.clone();
            attack_message(spec, &step.message, &z, t, client.attack_rng())?
        }
        _ => step.message,
    };
    Ok((msg, step.loss, step.eps_used))
}

fn zero_estimate(dim: usize) -> LipschitzEstimate {
    LipschitzEstimate {
        value: 0.0,
        grad: vec![0.0; dim],
        power_iters_used: 0,
        warm_start: Vec::new(),
    }
}

/// Stationarity gap of the current state, measured with clean full-batch
/// gradients of each honest client's training loss.
fn measure_gap(
    cfg: &ProtocolConfig,
    data: &FederatedData,
    clients: &[ClientState],
    server: &ServerState,
) -> Result<f64> {
    let robust = cfg.method.privacy_active();
    let honest: Vec<&ClientState> = clients.iter().filter(|c| c.honest).collect();
    let mut grads = Vec::with_capacity(honest.len());
    let mut lips = Vec::with_capacity(honest.len());
    for c in &honest {
        let (_, g) = mlp_loss_grad(&c.omega, &data.clients[c.id])?;
        grads.push(g.into_values());
        lips.push(if robust {
            c.lipschitz(cfg.kappa, cfg.power_iters)?
        } else {
            zero_estimate(c.omega.dim())
        });
    }
    let inputs: Vec<ClientResidualInput<'_>> = honest
        .iter()
        .enumerate()
        .map(|(k, c)| ClientResidualInput {
            omega: c.omega.values(),
            loss_grad: &grads[k],
            lipschitz: &lips[k],
            eta: c.eta,
            eps: c.eps,
            lambda: server.records[c.id].lambda,
            phi: &c.phi,
        })
        .collect();
    let extra: Vec<(&[f64], &[f64])> = clients
        .iter()
        .filter(|c| !c.honest)
        .map(|c| {
            let r = &server.records[c.id];
            (r.omega.as_slice(), r.phi.as_slice())
        })
        .collect();
    Ok(stationarity_gap(&StationarityInput {
        clients: &inputs,
        extra_records: &extra,
        z: server.z.values(),
        t: server.t,
        hp: &cfg.hp,
        c3: cfg.privacy.c3(),
        m: cfg.n_clients,
        privacy_active: cfg.method.privacy_active(),
        robust_active: robust,
    }))
}

/// Event-driven run on a virtual clock.
///
/// Each client repeatedly computes a local step and uploads it after a
/// random delay. Arrivals are processed in `(time, client id)` order; the
/// server steps as soon as `S` distinct uploads are buffered and answers
/// exactly those clients, who then take their dual step and start again.
#[derive(Debug)]
pub struct Simulation<'a> {
    cfg: &'a ProtocolConfig,
    data: &'a FederatedData,
    clients: Vec<ClientState>,
    server: ServerState,
    queue: BinaryHeap<Reverse<Pending>>,
    trace: TrainingTrace,
    honest_train: Batch,
    model_bytes: u64,
    done: bool,
    last_gap: Option<f64>,
}

impl<'a> Simulation<'a> {
    pub fn new(
        cfg: &'a ProtocolConfig,
        data: &'a FederatedData,
        seed: u64,
        fingerprint: String,
    ) -> Result<Self> {
        let (mut clients, server) = initial_state(cfg, data, seed)?;
        let mut queue = BinaryHeap::with_capacity(clients.len());
        for c in &mut clients {
            queue.push(Reverse(Pending {
                time: c.draw_delay(),
                client: c.id,
            }));
        }
        let honest: Vec<&Batch> = clients
            .iter()
            .filter(|c| c.honest)
            .map(|c| &data.clients[c.id])
            .collect();
        let honest_train = Batch::concat(&honest)?;
        let model_bytes = (server.z.dim() * core::mem::size_of::<f64>()) as u64;
        let mut sim = Self {
            cfg,
            data,
            clients,
            server,
            queue,
            trace: TrainingTrace::new(fingerprint, seed, cfg.n_clients),
            honest_train,
            model_bytes,
            done: false,
            last_gap: None,
        };
        sim.evaluate()?;
        Ok(sim)
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    pub fn trace(&self) -> &TrainingTrace {
        &self.trace
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn last_gap(&self) -> Option<f64> {
        self.last_gap
    }

    pub fn stationarity_gap(&self) -> Result<f64> {
        measure_gap(self.cfg, self.data, &self.clients, &self.server)
    }

    fn full(&self) -> bool {
        self.cfg.detail == TraceDetail::Full
    }

    fn evaluate(&mut self) -> Result<()> {
        let z = &self.server.z;
        let mut e = TraceEvent::new(EventKind::Eval, self.server.clock, self.server.t);
        e.train_loss = Some(mlp_loss(z, &self.honest_train)?);
        if !self.data.test.is_empty() {
            let preds = mlp_predict(z, &self.data.test)?;
            let scaler = &self.data.norm.target;
            let p = scaler.invert(&preds)?;
            let y = scaler.invert(self.data.test.targets())?;
            e.test_rmse = Some(rmse(&y, &p)?);
            e.test_mae = Some(mae(&y, &p)?);
        }
        self.trace.push(e);
        Ok(())
    }

    /// Processes arrivals until one server iteration (with its dual steps)
    /// completes. Returns false once the run has ended.
    pub fn advance(&mut self) -> Result<bool> {
        if self.done {
            return Ok(false);
        }
        let cfg = self.cfg;
        loop {
            let Reverse(next) = self.queue.pop().expect("every client always has a pending upload");
            let now = next.time;
            self.server.clock = now;
            let id = next.client;
            let (msg, loss, eps_used) =
                local_and_forge(&mut self.clients[id], &self.data.clients[id], cfg, now)?;
            if self.full() {
                let mut e = TraceEvent::new(EventKind::ClientStep, now, self.server.t);
                e.client_id = Some(id);
                e.train_loss = Some(loss);
                e.eps_per_client = Some(vec![eps_used]);
                self.trace.push(e);
            }
            if !self.server.receive(msg)? {
                continue;
            }
            let quorum = core::mem::take(&mut self.server.buffer);
            let broadcasts = server_aggregate_step(&mut self.server, &quorum, cfg)?;
            let t_done = self.server.t - 1;
            let mut duals = Vec::with_capacity(broadcasts.len());
            for b in &broadcasts {
                let c = &mut self.clients[b.client_id];
                client_dual_step(c, &b.z, b.lambda, t_done, cfg);
                let delay = c.draw_delay();
                self.queue.push(Reverse(Pending {
                    time: now + delay,
                    client: b.client_id,
                }));
                let mut e = TraceEvent::new(EventKind::DualStep, now, self.server.t);
                e.client_id = Some(b.client_id);
                duals.push(e);
            }
            let t = self.server.t;
            let at_end = t >= cfg.iterations;
            let mut s = TraceEvent::new(EventKind::ServerStep, now, t);
            s.eps_per_client = Some(self.server.eps());
            s.bytes_transferred = Some(comm_volume(self.model_bytes, broadcasts.len() as u64, 1));
            let gap_due = cfg.gap_every > 0 && (t.is_multiple_of(cfg.gap_every) || at_end);
            if gap_due && cfg.method != Method::Fedavg {
                let gap = self.stationarity_gap()?;
                s.stationarity_gap = Some(gap);
                self.last_gap = Some(gap);
            }
            let reached = cfg
                .gap_target
                .zip(s.stationarity_gap)
                .is_some_and(|(target, gap)| gap <= target);
            self.trace.push(s);
            if self.full() {
                for e in duals {
                    self.trace.push(e);
                }
            }
            self.done = at_end || reached;
            if t.is_multiple_of(cfg.eval_every) || self.done {
                self.evaluate()?;
            }
            return Ok(true);
        }
    }

    pub fn run(mut self) -> Result<TrainingTrace> {
        while self.advance()? {}
        Ok(self.trace)
    }

    pub fn into_parts(self) -> (Vec<ClientState>, ServerState, TrainingTrace) {
        (self.clients, self.server, self.trace)
    }
}

/// Runs the simulator to completion.
pub fn simulate(
    cfg: &ProtocolConfig,
    data: &FederatedData,
    seed: u64,
    fingerprint: String,
) -> Result<TrainingTrace> {
    Simulation::new(cfg, data, seed, fingerprint)?.run()
}

/// Lock-step loop with full participation: every client steps in id order,
/// then the server aggregates all uploads, then every client takes its dual
/// step. Used as an oracle for the event engine with `S = R`.
#[derive(Debug)]
pub struct SyncReference<'a> {
    cfg: &'a ProtocolConfig,
    data: &'a FederatedData,
    clients: Vec<ClientState>,
    server: ServerState,
}

impl<'a> SyncReference<'a> {
    pub fn new(cfg: &'a ProtocolConfig, data: &'a FederatedData, seed: u64) -> Result<Self> {
        let (clients, mut server) = initial_state(cfg, data, seed)?;
        server.quorum = cfg.n_clients;
        Ok(Self {
            cfg,
            data,
            clients,
            server,
        })
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    pub fn step(&mut self) -> Result<()> {
        let mut msgs = Vec::with_capacity(self.clients.len());
        for c in &mut self.clients {
            let (msg, _, _) = local_and_forge(c, &self.data.clients[c.id], self.cfg, 0.0)?;
            msgs.push(msg);
        }
        let broadcasts = server_aggregate_step(&mut self.server, &msgs, self.cfg)?;
        let t_done = self.server.t - 1;
        for b in &broadcasts {
            client_dual_step(&mut self.clients[b.client_id], &b.z, b.lambda, t_done, self.cfg);
        }
        Ok(())
    }
}
