//! Single runs, parameter sweeps, and method comparisons with their
//! on-disk artifacts.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, Context};
use bafdp_core::data::{build_federated, generate_synthetic, FederatedData, HolidayCalendar};
use bafdp_core::protocol::{simulate, Method, ProtocolConfig};
use bafdp_core::trace::{TraceSummary, TrainingTrace};
use rayon::prelude::*;

use crate::config::{ConfigError, ConfigIssue, RunConfig};
use crate::csv_io::{load_cdr_csv, LoadReport};
use crate::trace_io::{write_curves, write_summary, write_trace, SummaryRow};

pub const TRACE_FILE: &str = "trace.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";
pub const LOAD_REPORT_FILE: &str = "load_report.txt";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Runtime(_) => 1,
        }
    }
}

fn invalid(path: &str, message: impl Into<String>) -> RunError {
    RunError::Config(ConfigError::Invalid(vec![ConfigIssue {
        path: path.into(),
        message: message.into(),
    }]))
}

/// A validated configuration with its data loaded.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub protocol: ProtocolConfig,
    pub data: FederatedData,
    pub fingerprint: String,
    pub load_report: Option<LoadReport>,
}

pub fn prepare(config: &RunConfig) -> Result<Prepared, RunError> {
    config.validate()?;
    let d = &config.data;
    let (series, load_report) = if d.source == "synthetic" {
        let s = generate_synthetic(d.n_cells, d.n_days, config.sim.seed, &d.profile)
            .map_err(|e| anyhow!("synthetic data: {e}"))?;
        (s, None)
    } else {
        let (s, report) = load_cdr_csv(Path::new(&d.source)).map_err(anyhow::Error::from)?;
        (s, Some(report))
    };
    let holidays = HolidayCalendar::new(config.holiday_days().map_err(ConfigError::Invalid)?);
    let data = build_federated(
        &series,
        &config.window(),
        &holidays,
        config.protocol.r,
        d.partition,
        config.sim.seed,
    )
    .map_err(|e| match e {
        bafdp_core::Error::TooManyClients { .. } => invalid("data.partition", e.to_string()),
        other => RunError::Runtime(anyhow!("building client datasets: {other}")),
    })?;
    let protocol = config.protocol_config();
    Ok(Prepared {
        fingerprint: config.fingerprint(),
        config: config.clone(),
        protocol,
        data,
        load_report,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: TrainingTrace,
    pub summary: TraceSummary,
}

impl RunOutcome {
    pub fn row(&self, run_id: String, config: &RunConfig) -> SummaryRow {
        SummaryRow::from_summary(
            run_id,
            config.protocol.method.name().to_string(),
            config.data.h,
            config.attack.ratio,
            config.privacy.budget_a,
            &self.summary,
        )
    }
}

/// Runs in memory without touching the filesystem.
pub fn execute(prepared: &Prepared) -> anyhow::Result<RunOutcome> {
    let trace = simulate(
        &prepared.protocol,
        &prepared.data,
        prepared.config.sim.seed,
        prepared.fingerprint.clone(),
    )
    .map_err(|e| anyhow!("simulation aborted: {e}"))?;
    let summary = trace.summary(prepared.config.protocol.gap_target);
    Ok(RunOutcome { trace, summary })
}

/// Removes a directory this process created unless the work finished.
struct OutputGuard {
    dir: Option<PathBuf>,
}

impl OutputGuard {
    fn create(dir: &Path) -> anyhow::Result<Self> {
        let existed = dir.exists();
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: (!existed).then(|| dir.to_path_buf()),
        })
    }

    fn keep(mut self) {
        self.dir = None;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if let Some(dir) = self.dir.take() {
            log::warn!("removing partial output {}", dir.display());
            let _ = fs::remove_dir_all(dir);
        }
    }
}

fn write_run_artifacts(
    dir: &Path,
    prepared: &Prepared,
    outcome: &RunOutcome,
    run_id: String,
) -> anyhow::Result<SummaryRow> {
    write_trace(&dir.join(TRACE_FILE), &outcome.trace)?;
    let row = outcome.row(run_id, &prepared.config);
    write_summary(&dir.join(SUMMARY_FILE), std::slice::from_ref(&row))?;
    fs::write(dir.join(RESOLVED_CONFIG_FILE), prepared.config.to_toml())?;
    if let Some(report) = &prepared.load_report {
        fs::write(dir.join(LOAD_REPORT_FILE), report.render())?;
    }
    Ok(row)
}

fn run_into(config: &RunConfig, dir: &Path, run_id: String) -> Result<(RunOutcome, SummaryRow), RunError> {
    let prepared = prepare(config)?;
    let guard = OutputGuard::create(dir)?;
    let outcome = execute(&prepared)?;
    let row = write_run_artifacts(dir, &prepared, &outcome, run_id)?;
    guard.keep();
    Ok((outcome, row))
}

/// One run: trace, one-row summary, and the resolved configuration.
pub fn run(config: &RunConfig, out: &Path) -> Result<RunOutcome, RunError> {
    let run_id = format!("{}-{}", config.protocol.method, &config.fingerprint()[..12]);
    run_into(config, out, run_id).map(|(o, _)| o)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    BudgetA,
    AttackRatio,
    Quorum,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::BudgetA => "budget_a",
            SweepAxis::AttackRatio => "attack_ratio",
            SweepAxis::Quorum => "S",
        }
    }

    fn apply(self, config: &mut RunConfig, value: f64) -> Result<(), RunError> {
        match self {
            SweepAxis::BudgetA => config.privacy.budget_a = value,
            SweepAxis::AttackRatio => config.attack.ratio = value,
            SweepAxis::Quorum => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(invalid("sweep.values", format!("S must be a positive integer, got {value}")));
                }
                config.protocol.s = value as usize;
            }
        }
        Ok(())
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "budget_a" => Ok(SweepAxis::BudgetA),
            "attack_ratio" => Ok(SweepAxis::AttackRatio),
            "S" => Ok(SweepAxis::Quorum),
            _ => Err(format!("unknown sweep axis `{s}` (expected budget_a, attack_ratio, or S)")),
        }
    }
}

/// One run per value with a shared seed, in parallel. The combined table is
/// sorted by the axis value.
pub fn sweep(config: &RunConfig, axis: SweepAxis, values: &[f64], out: &Path) -> Result<Vec<SummaryRow>, RunError> {
    if values.is_empty() {
        return Err(invalid("sweep.values", "need at least one value"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut configs = Vec::with_capacity(sorted.len());
    let mut issues = Vec::new();
    for &v in &sorted {
        let mut c = config.clone();
        axis.apply(&mut c, v)?;
        for i in c.issues() {
            issues.push(ConfigIssue {
                path: i.path,
                message: format!("{} (at {axis} = {v})", i.message),
            });
        }
        configs.push((v, c));
    }
    if !issues.is_empty() {
        return Err(ConfigError::Invalid(issues).into());
    }
    let guard = OutputGuard::create(out)?;
    let rows: Vec<Result<SummaryRow, RunError>> = configs
        .par_iter()
        .map(|(v, c)| {
            let id = format!("{axis}={v}");
            run_into(c, &out.join(&id), id).map(|(_, row)| row)
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    write_summary(&out.join("sweep_summary.csv"), &rows)?;
    guard.keep();
    Ok(rows)
}

/// All four methods on shared data and seed.
pub fn compare(config: &RunConfig, out: &Path) -> Result<Vec<(Method, RunOutcome)>, RunError> {
    let configs: Vec<(Method, RunConfig)> = Method::ALL
        .iter()
        .map(|&m| {
            let mut c = config.clone();
            c.protocol.method = m;
            (m, c)
        })
        .collect();
    for (_, c) in &configs {
        c.validate()?;
    }
    let guard = OutputGuard::create(out)?;
    let results: Vec<Result<(Method, RunOutcome, SummaryRow), RunError>> = configs
        .par_iter()
        .map(|(m, c)| {
            run_into(c, &out.join(m.name()), m.name().to_string()).map(|(o, row)| (*m, o, row))
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<SummaryRow> = results.iter().map(|r| r.2.clone()).collect();
    write_summary(&out.join("compare_summary.csv"), &rows)?;
    let curves: Vec<(String, &TrainingTrace)> = results
        .iter()
        .map(|(m, o, _)| (m.name().to_string(), &o.trace))
        .collect();
    write_curves(&out.join("curves.csv"), &curves)?;
    guard.keep();
    Ok(results.into_iter().map(|(m, o, _)| (m, o)).collect())
}
