use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bafdp::config::RunConfig;
use bafdp::runner::{self, RunError, SweepAxis};
use clap::{Parser, Subcommand};

/// Byzantine-robust asynchronous federated learning with local differential
/// privacy, simulated on a virtual clock.
#[derive(Debug, Parser)]
#[command(name = "bafdp", version)]
struct Cli {
    /// Override `sim.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration.
    Run { config: PathBuf },
    /// Run one configuration per value of an axis.
    Sweep {
        config: PathBuf,
        /// budget_a, attack_ratio, or S
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Run bafdp, bsfdp, fedavg, and rsa_no_dp side by side.
    Compare { config: PathBuf },
}

fn load(path: &Path, cli: &Cli) -> Result<(RunConfig, PathBuf), RunError> {
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.sim.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    let out = config.output.dir.clone();
    Ok((config, out))
}

fn dispatch(cli: &Cli) -> Result<(), RunError> {
    match &cli.command {
        Command::Run { config } => {
            let (config, out) = load(config, cli)?;
            let o = runner::run(&config, &out)?;
            println!(
                "{}: final_rmse={} final_gap={} iterations={} virtual_time={:.3}",
                out.display(),
                fmt_opt(o.summary.final_rmse),
                fmt_opt(o.summary.final_gap),
                o.summary.iterations,
                o.summary.wall_virtual_time
            );
        }
        Command::Sweep { config, axis, values } => {
            let (config, out) = load(config, cli)?;
            for r in runner::sweep(&config, *axis, values, &out)? {
                println!("{}: final_rmse={}", r.run_id, fmt_opt(r.final_rmse));
            }
        }
        Command::Compare { config } => {
            let (config, out) = load(config, cli)?;
            for (m, o) in runner::compare(&config, &out)? {
                println!(
                    "{m}: final_rmse={} final_train_loss={} virtual_time={:.3}",
                    fmt_opt(o.summary.final_rmse),
                    fmt_opt(o.summary.final_train_loss),
                    o.summary.wall_virtual_time
                );
            }
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
