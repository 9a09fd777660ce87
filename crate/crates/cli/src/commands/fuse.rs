//! `cvqx fuse` — join delay, modem, sniffer and GNSS traces into one
//! record per packet.

use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

use cvqx_core::ingest::{
    build_cell_mapping, fuse, read_channels_csv_path, read_gnss_csv_path, read_modem_csv_path,
    read_oai_csv_path, write_fused_csv, FuseConfig, FusedRecord,
};
use cvqx_core::probe::read_delay_csv_path;

use crate::config::{pick, require};

use super::{echo_effective, write_artifact, Ctx};

#[derive(clap::Args)]
pub struct FuseArgs {
    /// Per-packet delay trace (delay.csv).
    #[arg(long, value_name = "CSV")]
    delays: Option<PathBuf>,

    /// Modem KPI trace.
    #[arg(long, value_name = "CSV")]
    modem: Option<PathBuf>,

    /// Sniffer KPI trace (ideally the ingest-cleaned one).
    #[arg(long, value_name = "CSV")]
    oai: Option<PathBuf>,

    /// GNSS trace.
    #[arg(long, value_name = "CSV")]
    gnss: Option<PathBuf>,

    /// Channel table supplying carrier frequency and bandwidth.
    #[arg(long, value_name = "CSV")]
    channels: Option<PathBuf>,

    /// Skip identity back-filling across sources.
    #[arg(long)]
    no_mapping: bool,

    /// Modem join window in milliseconds.
    #[arg(long)]
    modem_staleness_ms: Option<u64>,

    /// Sniffer join window in milliseconds.
    #[arg(long)]
    oai_staleness_ms: Option<u64>,

    /// GNSS join window in milliseconds.
    #[arg(long)]
    gnss_staleness_ms: Option<u64>,

    /// Constant modem clock offset in milliseconds.
    #[arg(long)]
    modem_offset_ms: Option<i64>,

    /// Constant sniffer clock offset in milliseconds.
    #[arg(long)]
    oai_offset_ms: Option<i64>,

    /// Constant GNSS clock offset in milliseconds.
    #[arg(long)]
    gnss_offset_ms: Option<i64>,
}

#[derive(Serialize)]
struct Effective {
    delays: String,
    modem: String,
    oai: String,
    gnss: Option<String>,
    channels: Option<String>,
    mapping: bool,
    modem_staleness_ms: u64,
    oai_staleness_ms: u64,
    gnss_staleness_ms: u64,
    modem_offset_ms: i64,
    oai_offset_ms: i64,
    gnss_offset_ms: i64,
}

fn freshness(records: &[FusedRecord], staleness: impl Fn(&FusedRecord) -> Option<u64>) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let fresh = records.iter().filter(|r| staleness(r).is_some()).count();
    100.0 * fresh as f64 / records.len() as f64
}

pub fn run(ctx: &Ctx, args: &FuseArgs) -> Result<()> {
    let section = &ctx.cfg.fuse;
    let delays_path = require(args.delays.clone(), section.delays.clone(), "fuse delay trace")?;
    let modem_path = require(args.modem.clone(), section.modem.clone(), "fuse modem trace")?;
    let oai_path = require(args.oai.clone(), section.oai.clone(), "fuse sniffer trace")?;
    let gnss_path = args.gnss.clone().or_else(|| section.gnss.clone());
    let channels_path = args.channels.clone().or_else(|| section.channels.clone());
    let no_mapping = args.no_mapping || section.no_mapping.unwrap_or(false);

    let defaults = FuseConfig::default();
    let eff = Effective {
        delays: delays_path.display().to_string(),
        modem: modem_path.display().to_string(),
        oai: oai_path.display().to_string(),
        gnss: gnss_path.as_ref().map(|p| p.display().to_string()),
        channels: channels_path.as_ref().map(|p| p.display().to_string()),
        mapping: !no_mapping,
        modem_staleness_ms: pick(
            args.modem_staleness_ms,
            section.modem_staleness_ms,
            defaults.modem_staleness_ns / 1_000_000,
        ),
        oai_staleness_ms: pick(
            args.oai_staleness_ms,
            section.oai_staleness_ms,
            defaults.oai_staleness_ns / 1_000_000,
        ),
        gnss_staleness_ms: pick(
            args.gnss_staleness_ms,
            section.gnss_staleness_ms,
            defaults.gnss_staleness_ns / 1_000_000,
        ),
        modem_offset_ms: pick(args.modem_offset_ms, section.modem_offset_ms, 0),
        oai_offset_ms: pick(args.oai_offset_ms, section.oai_offset_ms, 0),
        gnss_offset_ms: pick(args.gnss_offset_ms, section.gnss_offset_ms, 0),
    };

    let delays = read_delay_csv_path(&delays_path)
        .with_context(|| format!("cannot read {}", delays_path.display()))?;
    let modem = read_modem_csv_path(&modem_path)
        .with_context(|| format!("cannot read {}", modem_path.display()))?;
    let oai = read_oai_csv_path(&oai_path)
        .with_context(|| format!("cannot read {}", oai_path.display()))?;
    let gnss = match &gnss_path {
        Some(path) => {
            read_gnss_csv_path(path).with_context(|| format!("cannot read {}", path.display()))?
        }
        None => Vec::new(),
    };
    let channels = match &channels_path {
        Some(path) => read_channels_csv_path(path)
            .with_context(|| format!("cannot read {}", path.display()))?,
        None => Vec::new(),
    };

    let mapping = if no_mapping {
        None
    } else {
        Some(build_cell_mapping(&modem, &oai)?)
    };
    let cfg = FuseConfig {
        modem_staleness_ns: eff.modem_staleness_ms * 1_000_000,
        oai_staleness_ns: eff.oai_staleness_ms * 1_000_000,
        gnss_staleness_ns: eff.gnss_staleness_ms * 1_000_000,
        modem_offset_ns: eff.modem_offset_ms * 1_000_000,
        oai_offset_ns: eff.oai_offset_ms * 1_000_000,
        gnss_offset_ns: eff.gnss_offset_ms * 1_000_000,
        channels,
        mapping,
    };
    let fused = fuse(&delays, &modem, &oai, &gnss, &cfg)?;

    let mut buf = Vec::new();
    write_fused_csv(&mut buf, &fused)?;
    let path = write_artifact(&ctx.out_dir, "fused.csv", &buf)?;
    echo_effective(&ctx.out_dir, "fuse", ctx.seed, &eff)?;

    println!(
        "fuse: {} records, fresh modem {:.1}% / sniffer {:.1}% / gnss {:.1}% -> {}",
        fused.len(),
        freshness(&fused, |r| r.modem_staleness_ns),
        freshness(&fused, |r| r.oai_staleness_ns),
        freshness(&fused, |r| r.gnss_staleness_ns),
        path.display()
    );
    Ok(())
}
