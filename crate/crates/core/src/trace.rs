//! Append-only run trace and the summaries derived from it.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ClientStep,
    ServerStep,
    DualStep,
    Eval,
}

/// One trace record. Fields that do not apply to an event kind are `None`.
///
/// * `client_step`: `client_id`, minibatch `train_loss`, and in
///   `eps_per_client` the single privacy level used for that activation.
/// * `server_step`: `eps_per_client` as known to the server for every
///   client, `bytes_transferred`, and `stationarity_gap` when measured.
/// * `dual_step`: `client_id`.
/// * `eval`: full-batch `train_loss` of the global model on the honest
///   training data plus denormalized `test_rmse` / `test_mae`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEvent {
    pub virtual_time: f64,
    pub iteration: u64,
    pub kind: EventKind,
    pub client_id: Option<usize>,
    pub train_loss: Option<f64>,
    pub eps_per_client: Option<Vec<f64>>,
    pub stationarity_gap: Option<f64>,
    pub bytes_transferred: Option<u64>,
    pub test_rmse: Option<f64>,
    pub test_mae: Option<f64>,
}

impl TraceEvent {
    pub fn new(kind: EventKind, virtual_time: f64, iteration: u64) -> Self {
        Self {
            virtual_time,
            iteration,
            kind,
            client_id: None,
            train_loss: None,
            eps_per_client: None,
            stationarity_gap: None,
            bytes_transferred: None,
            test_rmse: None,
            test_mae: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub config_fingerprint: String,
    pub seed: u64,
    pub n_clients: usize,
    pub events: Vec<TraceEvent>,
}

impl TrainingTrace {
    pub fn new(config_fingerprint: String, seed: u64, n_clients: usize) -> Self {
        Self {
            config_fingerprint,
            seed,
            n_clients,
            events: Vec::new(),
        }
    }

    pub fn push(&mut self, event: TraceEvent) {
        debug_assert!(self
            .events
            .last()
            .is_none_or(|e| e.virtual_time <= event.virtual_time && e.iteration <= event.iteration));
        self.events.push(event);
    }

    pub fn evals(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(|e| e.kind == EventKind::Eval)
    }

    /// `(iteration, eps)` at each activation of `client_id`.
    pub fn privacy_trajectory(&self, client_id: usize) -> Result<Vec<(u64, f64)>> {
        if client_id >= self.n_clients {
            return Err(Error::UnknownClient(client_id));
        }
        Ok(self
            .events
            .iter()
            .filter(|e| e.kind == EventKind::ClientStep && e.client_id == Some(client_id))
            .filter_map(|e| {
                e.eps_per_client
                    .as_ref()
                    .and_then(|v| v.first())
                    .map(|eps| (e.iteration, *eps))
            })
            .collect())
    }

    /// Last measured stationarity gap.
    pub fn final_gap(&self) -> Option<f64> {
        self.events.iter().rev().find_map(|e| e.stationarity_gap)
    }

    /// Virtual time of the first evaluation whose training loss is at or
    /// below `target`.
    pub fn time_to_loss(&self, target: f64) -> Option<f64> {
        self.evals()
            .find(|e| e.train_loss.is_some_and(|l| l <= target))
            .map(|e| e.virtual_time)
    }

    pub fn summary(&self, gap_target: Option<f64>) -> TraceSummary {
        let last_eval = self.evals().last();
        TraceSummary {
            final_rmse: last_eval.and_then(|e| e.test_rmse),
            final_mae: last_eval.and_then(|e| e.test_mae),
            final_train_loss: last_eval.and_then(|e| e.train_loss),
            final_gap: self.final_gap(),
            iters_to_gap: gap_target.and_then(|target| {
                self.events
                    .iter()
                    .find(|e| e.stationarity_gap.is_some_and(|g| g <= target))
                    .map(|e| e.iteration)
            }),
            wall_virtual_time: self.events.last().map_or(0.0, |e| e.virtual_time),
            iterations: self.events.last().map_or(0, |e| e.iteration),
            bytes_total: self.events.iter().filter_map(|e| e.bytes_transferred).sum(),
        }
    }
}

/// Figures derived from a trace alone, so they can be recomputed from a
/// persisted trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub final_rmse: Option<f64>,
    pub final_mae: Option<f64>,
    pub final_train_loss: Option<f64>,
    pub final_gap: Option<f64>,
    pub iters_to_gap: Option<u64>,
    pub wall_virtual_time: f64,
    pub iterations: u64,
    pub bytes_total: u64,
}
