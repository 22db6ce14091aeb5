use alloc::vec::Vec;
use core::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::calendar::HolidayCalendar;
use super::norm::NormState;
use super::series::TrafficSeries;
use super::window::{make_windows, WindowConfig};
use crate::error::{Error, Result};
use crate::mlp::Batch;
use crate::rng::{purpose, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionScheme {
    /// Whole cells dealt round-robin in order of traffic volume.
    ByCell,
    /// All samples shuffled and dealt round-robin.
    Iid,
}

impl FromStr for PartitionScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "by_cell" => Ok(Self::ByCell),
            "iid" => Ok(Self::Iid),
            _ => Err(Error::invalid("data.partition", alloc::format!("unknown scheme `{s}`"))),
        }
    }
}

/// Splits per-cell training batches across `m` clients.
///
/// `cells` holds `(traffic volume, training batch)` per cell. Returns, per
/// client, its batch and the indices of the cells it holds (every cell for
/// `iid`).
pub fn partition_clients(
    cells: &[(f64, Batch)],
    m: usize,
    scheme: PartitionScheme,
    seed: u64,
) -> Result<Vec<(Batch, Vec<usize>)>> {
    let first = &cells.first().ok_or(Error::EmptyBatch)?.1;
    if m == 0 {
        return Err(Error::invalid("clients", "need at least one client"));
    }
    let (d_x, d_y) = (first.d_x(), first.d_y());
    match scheme {
        PartitionScheme::ByCell => {
            if m > cells.len() {
                return Err(Error::TooManyClients {
                    clients: m,
                    cells: cells.len(),
                });
            }
            let mut order: Vec<usize> = (0..cells.len()).collect();
            order.sort_by(|&a, &b| cells[b].0.total_cmp(&cells[a].0).then(a.cmp(&b)));
            let mut out: Vec<(Batch, Vec<usize>)> =
                (0..m).map(|_| (Batch::empty(d_x, d_y), Vec::new())).collect();
            for (rank, &cell) in order.iter().enumerate() {
                let slot = &mut out[rank % m];
                slot.0 = Batch::concat(&[&slot.0, &cells[cell].1])?;
                slot.1.push(cell);
            }
            for slot in &mut out {
                slot.1.sort_unstable();
            }
            Ok(out)
        }
        PartitionScheme::Iid => {
            let parts: Vec<&Batch> = cells.iter().map(|c| &c.1).collect();
            let pooled = Batch::concat(&parts)?;
            if pooled.len() < m {
                return Err(Error::invalid("clients", "fewer samples than clients"));
            }
            let mut idx: Vec<usize> = (0..pooled.len()).collect();
            idx.shuffle(&mut stream(seed, purpose::PARTITION, 0));
            let all: Vec<usize> = (0..cells.len()).collect();
            Ok((0..m)
                .map(|c| {
                    let mine: Vec<usize> = idx.iter().skip(c).step_by(m).copied().collect();
                    (pooled.select(&mine), all.clone())
                })
                .collect())
        }
    }
}

/// Normalized per-client training data and the pooled test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederatedData {
    pub clients: Vec<Batch>,
    /// Cell indices held by each client.
    pub client_cells: Vec<Vec<usize>>,
    pub test: Batch,
    pub norm: NormState,
}

impl FederatedData {
    pub fn d_x(&self) -> usize {
        self.test.d_x()
    }

    pub fn d_y(&self) -> usize {
        self.test.d_y()
    }
}

/// Windows every series, splits train/test, fits min-max scaling on the
/// pooled training samples, and partitions the training data.
pub fn build_federated(
    series: &[TrafficSeries],
    window: &WindowConfig,
    holidays: &HolidayCalendar,
    m: usize,
    scheme: PartitionScheme,
    seed: u64,
) -> Result<FederatedData> {
    if series.is_empty() {
        return Err(Error::invalid("data", "no series"));
    }
    let mut cells = Vec::with_capacity(series.len());
    let mut tests = Vec::with_capacity(series.len());
    for s in series {
        let w = make_windows(s, window, holidays)?;
        let train = w.train();
        if train.is_empty() {
            return Err(Error::SeriesTooShort {
                needed: window.min_len() + window.test_hours,
                got: s.len(),
            });
        }
        tests.push(w.test());
        cells.push((s.total_volume(), train));
    }
    let pooled = Batch::concat(&cells.iter().map(|c| &c.1).collect::<Vec<_>>())?;
    let norm = NormState::fit(&pooled)?;
    let test = norm.apply(&Batch::concat(&tests.iter().collect::<Vec<_>>())?)?;
    let parts = partition_clients(&cells, m, scheme, seed)?;
    let mut clients = Vec::with_capacity(m);
    let mut client_cells = Vec::with_capacity(m);
    for (b, c) in parts {
        clients.push(norm.apply(&b)?);
        client_cells.push(c);
    }
    Ok(FederatedData {
        clients,
        client_cells,
        test,
        norm,
    })
}
