//! Trace files (JSON lines), summary tables, and loss curves (CSV).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use bafdp_core::trace::{EventKind, TraceEvent, TraceSummary, TrainingTrace};
use serde::{Deserialize, Serialize};

/// First line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceHeader {
    config_fingerprint: String,
    seed: u64,
    n_clients: usize,
}

pub fn write_trace(path: &Path, trace: &TrainingTrace) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    let header = TraceHeader {
        config_fingerprint: trace.config_fingerprint.clone(),
        seed: trace.seed,
        n_clients: trace.n_clients,
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for e in &trace.events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<TrainingTrace> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    let Some(first) = lines.next() else {
        bail!("{}: empty trace", path.display());
    };
    let header: TraceHeader = serde_json::from_str(&first?)
        .with_context(|| format!("{}:1: bad trace header", path.display()))?;
    let mut trace = TrainingTrace::new(header.config_fingerprint, header.seed, header.n_clients);
    for (k, line) in lines.enumerate() {
        let e: TraceEvent = serde_json::from_str(&line?)
            .with_context(|| format!("{}:{}: bad trace event", path.display(), k + 2))?;
        trace.events.push(e);
    }
    Ok(trace)
}

/// One row of a summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub run_id: String,
    pub method: String,
    #[serde(rename = "H")]
    pub h: usize,
    pub attack_ratio: f64,
    pub budget_a: f64,
    pub final_rmse: Option<f64>,
    pub final_mae: Option<f64>,
    pub iters_to_gap: Option<u64>,
    pub wall_virtual_time: f64,
    pub bytes_total: u64,
}

impl SummaryRow {
    pub fn from_summary(
        run_id: String,
        method: String,
        h: usize,
        attack_ratio: f64,
        budget_a: f64,
        s: &TraceSummary,
    ) -> Self {
        Self {
            run_id,
            method,
            h,
            attack_ratio,
            budget_a,
            final_rmse: s.final_rmse,
            final_mae: s.final_mae,
            iters_to_gap: s.iters_to_gap,
            wall_virtual_time: s.wall_virtual_time,
            bytes_total: s.bytes_total,
        }
    }
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize().map(|row| Ok(row?)).collect()
}

/// Evaluation points of several runs, one row per evaluation.
pub fn write_curves(path: &Path, runs: &[(String, &TrainingTrace)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["method", "iteration", "virtual_time", "train_loss", "test_rmse", "test_mae"])?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for (name, trace) in runs {
        for e in trace.events.iter().filter(|e| e.kind == EventKind::Eval) {
            w.write_record([
                name.clone(),
                e.iteration.to_string(),
                e.virtual_time.to_string(),
                opt(e.train_loss),
                opt(e.test_rmse),
                opt(e.test_mae),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
