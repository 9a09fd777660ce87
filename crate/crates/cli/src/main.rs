//! cvqx — one entry point wiring every pipeline stage together: UDP delay
//! probing against a relay, lossless capture, synthetic trace generation,
//! KPI ingestion and fusion, QoS analysis reports, and the feature
//! selection / training / evaluation workflow.
//!
//! Reproducibility contract: identical config + seed produce byte-identical
//! artifacts (live-network probe runs excepted), every artifact is written
//! atomically (temp file + rename), and each output directory receives an
//! `effective-<command>.toml` recording the fully resolved settings that
//! produced it.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Ctx;
use config::PipelineConfig;

/// Usage-level failure: malformed config, unknown key, missing setting.
/// Exits with status 2, like clap's own argument errors; everything else
/// (module errors, I/O) exits with status 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Parser)]
#[command(
    name = "cvqx",
    version,
    about = "E2E delay probing, trace fusion and delay-class prediction for cellular V2X links"
)]
struct Cli {
    /// TOML pipeline config; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory artifacts are written into.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Send timestamped UDP probes at a relay and record per-packet delay.
    Probe(commands::probe::ProbeArgs),
    /// Run the UDP relay (echo, or forward to a downstream peer).
    Relay(commands::relay::RelayArgs),
    /// Capture a synthetic sample stream to disk through the
    /// double-buffered recorder.
    Record(commands::record::RecordArgs),
    /// Generate a synthetic drive trace (delay + KPI + GNSS CSVs).
    Simulate(commands::simulate::SimulateArgs),
    /// Validate KPI traces, map cell identities and drop decode artifacts.
    Ingest(commands::ingest::IngestArgs),
    /// Join delay, modem, sniffer and GNSS traces into fused.csv.
    Fuse(commands::fuse::FuseArgs),
    /// Produce analysis reports from delay or fused traces.
    Analyze {
        #[command(subcommand)]
        report: commands::analyze::AnalyzeCmd,
    },
    /// Feature selection, training, evaluation and baselines.
    Ml {
        #[command(subcommand)]
        task: commands::ml::MlCmd,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = PipelineConfig::load(cli.config.as_deref())?;
    let ctx = Ctx {
        seed: cli.seed.or(cfg.seed),
        out_dir: cli
            .out_dir
            .clone()
            .or_else(|| cfg.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        cfg,
    };
    match &cli.command {
        Command::Probe(args) => commands::probe::run(&ctx, args),
        Command::Relay(args) => commands::relay::run(&ctx, args),
        Command::Record(args) => commands::record::run(&ctx, args),
        Command::Simulate(args) => commands::simulate::run(&ctx, args),
        Command::Ingest(args) => commands::ingest::run(&ctx, args),
        Command::Fuse(args) => commands::fuse::run(&ctx, args),
        Command::Analyze { report } => commands::analyze::run(&ctx, report),
        Command::Ml { task } => commands::ml::run(&ctx, task),
    }
}
