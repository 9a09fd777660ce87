//! `cvqx probe` — send timestamped UDP probes and record per-packet delay.

use std::time::Duration;

use anyhow::Result;
use serde::Serialize;

use cvqx_core::probe::{self, ProbeConfig};

use crate::config::{pick, require};

use super::{echo_effective, resolve_addr, write_artifact, Ctx};

#[derive(clap::Args)]
pub struct ProbeArgs {
    /// Relay address to probe, host:port.
    #[arg(long)]
    target: Option<String>,

    /// Number of packets to send.
    #[arg(long)]
    count: Option<u64>,

    /// Inter-send interval in milliseconds.
    #[arg(long)]
    interval_ms: Option<u64>,

    /// Total datagram size in octets (header + zero padding).
    #[arg(long)]
    payload: Option<usize>,

    /// A packet unanswered this long is marked lost (milliseconds).
    #[arg(long)]
    timeout_ms: Option<u64>,

    /// Local bind address (defaults to an ephemeral port).
    #[arg(long)]
    bind: Option<String>,

    /// Session id stamped into every packet.
    #[arg(long)]
    session_id: Option<u32>,
}

#[derive(Serialize)]
struct Effective {
    target: String,
    count: u64,
    interval_ms: u64,
    payload: usize,
    timeout_ms: u64,
    bind: Option<String>,
    session_id: u32,
}

pub fn run(ctx: &Ctx, args: &ProbeArgs) -> Result<()> {
    let section = &ctx.cfg.probe;
    let eff = Effective {
        target: require(args.target.clone(), section.target.clone(), "probe target")?,
        count: require(args.count, section.count, "probe count")?,
        interval_ms: pick(args.interval_ms, section.interval_ms, 40),
        payload: pick(args.payload, section.payload, 300),
        timeout_ms: pick(args.timeout_ms, section.timeout_ms, 1000),
        bind: args.bind.clone().or_else(|| section.bind.clone()),
        session_id: pick(args.session_id, section.session_id, 1),
    };

    let cfg = ProbeConfig {
        target: resolve_addr(&eff.target, "probe target")?,
        session_id: eff.session_id,
        interval: Duration::from_millis(eff.interval_ms),
        payload_size: eff.payload,
        count: eff.count,
        timeout: Duration::from_millis(eff.timeout_ms),
        bind: match &eff.bind {
            Some(text) => Some(resolve_addr(text, "probe bind address")?),
            None => None,
        },
    };

    let run = probe::run_probe(&cfg)?;

    let mut buf = Vec::new();
    probe::write_delay_csv(&mut buf, &run.records)?;
    let path = write_artifact(&ctx.out_dir, "delay.csv", &buf)?;
    echo_effective(&ctx.out_dir, "probe", ctx.seed, &eff)?;

    let mean = run
        .meta
        .sent
        .checked_sub(run.meta.lost)
        .filter(|&n| n > 0)
        .and_then(|_| run.mean_delay_ms())
        .map(|m| format!("{m:.2}"))
        .unwrap_or_else(|| "n/a".into());
    println!(
        "probe: sent={} lost={} late={} foreign={} mean_delay_ms={} max_schedule_deviation_ms={:.3} -> {}",
        run.meta.sent,
        run.meta.lost,
        run.meta.late,
        run.meta.foreign,
        mean,
        run.meta.max_schedule_deviation_ms,
        path.display()
    );
    Ok(())
}
