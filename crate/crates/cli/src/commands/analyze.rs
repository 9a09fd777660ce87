//! `cvqx analyze` — QoS reports over delay or fused traces: threshold
//! compliance, per-eNB statistics, coverage, interval effect, windowed
//! series and channel occupancy.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

use cvqx_core::analyze::{
    channel_inventory, compliance, coverage_stats, enb_stats, enb_stats_summary, interval_effect,
    windowed_delay_series, write_channels_report_csv, write_enb_stats_csv, write_series_csv,
    DEFAULT_RSRP_THRESHOLD_DBM, DEFAULT_THRESHOLDS_MS,
};
use cvqx_core::ingest::{read_fused_csv_path, FusedRecord};
use cvqx_core::probe::{read_delay_csv_path, DelayRecord, DELAY_CSV_HEADER};

use crate::config::{pick, require};
use crate::UsageError;

use super::{echo_effective, write_artifact, Ctx};

#[derive(clap::Subcommand)]
pub enum AnalyzeCmd {
    /// Fraction of packets meeting each delay threshold, plus loss rate.
    Compliance(ComplianceArgs),
    /// Per-eNB delay distribution and threshold compliance.
    Enb(EnbArgs),
    /// Time in poor coverage below an RSRP threshold.
    Coverage(CoverageArgs),
    /// Mean-delay deltas between runs probed at different send intervals.
    Interval(IntervalArgs),
    /// Tumbling-window delay averages for plotting.
    Series(SeriesArgs),
    /// Carrier occupancy table with resolved downlink frequencies.
    Channels(ChannelsArgs),
}

#[derive(clap::Args)]
pub struct ComplianceArgs {
    /// Input trace: delay.csv or fused.csv.
    #[arg(long = "in", value_name = "CSV")]
    input: Option<PathBuf>,

    /// Delay threshold in milliseconds; repeatable.
    #[arg(long = "threshold-ms")]
    thresholds_ms: Vec<f64>,
}

#[derive(clap::Args)]
pub struct EnbArgs {
    /// Input trace: fused.csv.
    #[arg(long = "in", value_name = "CSV")]
    input: Option<PathBuf>,

    /// Delay threshold in milliseconds; repeatable.
    #[arg(long = "threshold-ms")]
    thresholds_ms: Vec<f64>,
}

#[derive(clap::Args)]
pub struct CoverageArgs {
    /// Input trace: fused.csv.
    #[arg(long = "in", value_name = "CSV")]
    input: Option<PathBuf>,

    /// RSRP below this counts as poor coverage (dBm).
    #[arg(long)]
    rsrp_threshold_dbm: Option<f64>,
}

#[derive(clap::Args)]
pub struct IntervalArgs {
    /// One probe run per send interval, as INTERVAL_MS=CSV; repeatable,
    /// at least two runs.
    #[arg(long = "run", value_name = "INTERVAL_MS=CSV", required = true)]
    runs: Vec<String>,
}

#[derive(clap::Args)]
pub struct SeriesArgs {
    /// Input trace: delay.csv or fused.csv.
    #[arg(long = "in", value_name = "CSV")]
    input: Option<PathBuf>,

    /// Tumbling window width in milliseconds.
    #[arg(long)]
    window_ms: Option<u64>,
}

#[derive(clap::Args)]
pub struct ChannelsArgs {
    /// Input trace: fused.csv.
    #[arg(long = "in", value_name = "CSV")]
    input: Option<PathBuf>,
}

/// Read per-packet delay records from either CSV shape: the probe's
/// delay.csv, or fused.csv (whose columns extend the delay header).
fn read_delays_any(path: &Path) -> Result<Vec<DelayRecord>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut header = String::new();
    BufReader::new(file)
        .read_line(&mut header)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let header = header.trim_end();
    if header == DELAY_CSV_HEADER {
        return Ok(read_delay_csv_path(path)?);
    }
    if header.starts_with(DELAY_CSV_HEADER) {
        return Ok(read_fused_csv_path(path)?.iter().map(delay_of).collect());
    }
    Err(anyhow!(
        "{} is neither a delay trace nor a fused trace (unrecognized header)",
        path.display()
    ))
}

fn delay_of(r: &FusedRecord) -> DelayRecord {
    DelayRecord {
        session_id: r.session_id,
        sequence: r.sequence,
        tx_time_ns: r.tx_time_ns,
        rx_time_ns: r.rx_time_ns,
        e2e_delay_ms: r.e2e_delay_ms,
        lost: r.lost,
    }
}

fn read_fused(path: &Path) -> Result<Vec<FusedRecord>> {
    read_fused_csv_path(path).with_context(|| format!("cannot read {}", path.display()))
}

#[derive(Serialize)]
struct ThresholdEffective {
    input: String,
    thresholds_ms: Vec<f64>,
}

#[derive(Serialize)]
struct CoverageEffective {
    input: String,
    rsrp_threshold_dbm: f64,
}

#[derive(Serialize)]
struct IntervalEffective {
    runs: Vec<String>,
}

#[derive(Serialize)]
struct SeriesEffective {
    input: String,
    window_ms: u64,
}

#[derive(Serialize)]
struct ChannelsEffective {
    input: String,
}

fn thresholds(flag: &[f64], cfg: &Option<Vec<f64>>) -> Vec<f64> {
    if !flag.is_empty() {
        flag.to_vec()
    } else {
        cfg.clone().unwrap_or_else(|| DEFAULT_THRESHOLDS_MS.to_vec())
    }
}

pub fn run(ctx: &Ctx, cmd: &AnalyzeCmd) -> Result<()> {
    let section = &ctx.cfg.analyze;
    match cmd {
        AnalyzeCmd::Compliance(args) => {
            let input = require(args.input.clone(), section.input.clone(), "analyze input")?;
            let eff = ThresholdEffective {
                input: input.display().to_string(),
                thresholds_ms: thresholds(&args.thresholds_ms, &section.thresholds_ms),
            };
            let records = read_delays_any(&input)?;
            let report = compliance(&records, &eff.thresholds_ms)?;
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            let path = write_artifact(&ctx.out_dir, "compliance.csv", &buf)?;
            echo_effective(&ctx.out_dir, "analyze-compliance", ctx.seed, &eff)?;
            println!("{}", report.summary());
            println!("-> {}", path.display());
        }
        AnalyzeCmd::Enb(args) => {
            let input = require(args.input.clone(), section.input.clone(), "analyze input")?;
            let eff = ThresholdEffective {
                input: input.display().to_string(),
                thresholds_ms: thresholds(&args.thresholds_ms, &section.thresholds_ms),
            };
            let stats = enb_stats(&read_fused(&input)?, &eff.thresholds_ms);
            let mut buf = Vec::new();
            write_enb_stats_csv(&mut buf, &stats)?;
            let path = write_artifact(&ctx.out_dir, "enb_stats.csv", &buf)?;
            echo_effective(&ctx.out_dir, "analyze-enb", ctx.seed, &eff)?;
            println!("{}", enb_stats_summary(&stats));
            println!("-> {}", path.display());
        }
        AnalyzeCmd::Coverage(args) => {
            let input = require(args.input.clone(), section.input.clone(), "analyze input")?;
            let eff = CoverageEffective {
                input: input.display().to_string(),
                rsrp_threshold_dbm: pick(
                    args.rsrp_threshold_dbm,
                    section.rsrp_threshold_dbm,
                    DEFAULT_RSRP_THRESHOLD_DBM,
                ),
            };
            let rsrp: Vec<f64> = read_fused(&input)?
                .iter()
                .filter_map(|r| r.modem_rsrp_dbm.or(r.rsrp_dbm))
                .collect();
            let report = coverage_stats(&rsrp, eff.rsrp_threshold_dbm)?;
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            let path = write_artifact(&ctx.out_dir, "coverage.csv", &buf)?;
            echo_effective(&ctx.out_dir, "analyze-coverage", ctx.seed, &eff)?;
            println!("{}", report.summary());
            println!("-> {}", path.display());
        }
        AnalyzeCmd::Interval(args) => {
            let eff = IntervalEffective { runs: args.runs.clone() };
            let mut runs = std::collections::BTreeMap::new();
            for pair in &args.runs {
                let (interval, path) = pair.split_once('=').ok_or_else(|| {
                    anyhow!(UsageError(format!(
                        "--run takes INTERVAL_MS=CSV, got '{pair}'"
                    )))
                })?;
                let interval: u64 = interval.parse().map_err(|_| {
                    anyhow!(UsageError(format!(
                        "--run interval must be an integer, got '{interval}'"
                    )))
                })?;
                let delays: Vec<f64> = read_delays_any(Path::new(path))?
                    .iter()
                    .filter_map(|r| r.e2e_delay_ms)
                    .collect();
                runs.insert(interval, delays);
            }
            let report = interval_effect(&runs)?;
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            let path = write_artifact(&ctx.out_dir, "interval.csv", &buf)?;
            echo_effective(&ctx.out_dir, "analyze-interval", ctx.seed, &eff)?;
            println!("{}", report.summary());
            println!("-> {}", path.display());
        }
        AnalyzeCmd::Series(args) => {
            let input = require(args.input.clone(), section.input.clone(), "analyze input")?;
            let eff = SeriesEffective {
                input: input.display().to_string(),
                window_ms: pick(args.window_ms, section.window_ms, 250),
            };
            let series = windowed_delay_series(&read_delays_any(&input)?, eff.window_ms)?;
            let mut buf = Vec::new();
            write_series_csv(&mut buf, &series)?;
            let path = write_artifact(&ctx.out_dir, "series.csv", &buf)?;
            echo_effective(&ctx.out_dir, "analyze-series", ctx.seed, &eff)?;
            println!(
                "series: {} windows of {} ms -> {}",
                series.len(),
                eff.window_ms,
                path.display()
            );
        }
        AnalyzeCmd::Channels(args) => {
            let input = require(args.input.clone(), section.input.clone(), "analyze input")?;
            let eff = ChannelsEffective {
                input: input.display().to_string(),
            };
            let (table, unattributed) = channel_inventory(&read_fused(&input)?);
            let mut buf = Vec::new();
            write_channels_report_csv(&mut buf, &table)?;
            let path = write_artifact(&ctx.out_dir, "channels_report.csv", &buf)?;
            echo_effective(&ctx.out_dir, "analyze-channels", ctx.seed, &eff)?;
            for c in &table {
                let fc = c
                    .fc_dl_mhz
                    .map(|v| format!("{v} MHz"))
                    .unwrap_or_else(|| "unmapped".into());
                let bw = c
                    .bandwidth_mhz
                    .map(|v| format!("{v} MHz"))
                    .unwrap_or_else(|| "unknown".into());
                println!(
                    "band {} earfcn {} fc {} bandwidth {}: {:.1}% ({} records)",
                    c.band, c.earfcn, fc, bw, c.percent, c.count
                );
            }
            println!(
                "channels: {} carriers, {} records without channel identity -> {}",
                table.len(),
                unattributed,
                path.display()
            );
        }
    }
    Ok(())
}
