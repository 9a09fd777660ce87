//! `cvqx relay` — run the UDP echo/forward relay.

use std::thread;
use std::time::Duration;

use anyhow::Result;

use cvqx_core::relay::{self, RelayConfig, RelayMode};

use crate::config::pick;

use super::{resolve_addr, Ctx};

#[derive(clap::Args)]
pub struct RelayArgs {
    /// Listen address.
    #[arg(long)]
    bind: Option<String>,

    /// Forward datagrams to this peer instead of echoing them back.
    #[arg(long)]
    forward_to: Option<String>,

    /// Fixed extra delay applied to every relayed datagram (test knob).
    #[arg(long)]
    injected_delay_ms: Option<f64>,

    /// Probability in [0,1] of silently dropping a datagram (test knob).
    #[arg(long)]
    injected_loss_rate: Option<f64>,

    /// Stop after this many seconds and print statistics; 0 runs forever.
    #[arg(long)]
    duration_s: Option<u64>,
}

pub fn run(ctx: &Ctx, args: &RelayArgs) -> Result<()> {
    let section = &ctx.cfg.relay;
    let bind_text = pick(
        args.bind.clone(),
        section.bind.clone(),
        "0.0.0.0:5201".to_string(),
    );
    let forward_text = args.forward_to.clone().or_else(|| section.forward_to.clone());
    let duration_s = pick(args.duration_s, section.duration_s, 0);

    let cfg = RelayConfig {
        bind: resolve_addr(&bind_text, "relay bind address")?,
        mode: if forward_text.is_some() {
            RelayMode::Forward
        } else {
            RelayMode::Echo
        },
        forward_to: match &forward_text {
            Some(text) => Some(resolve_addr(text, "relay forward address")?),
            None => None,
        },
        injected_delay_ms: pick(args.injected_delay_ms, section.injected_delay_ms, 0.0),
        injected_loss_rate: pick(args.injected_loss_rate, section.injected_loss_rate, 0.0),
        seed: ctx.seed_or_default(),
    };

    let handle = relay::serve(&cfg)?;
    let mode = match cfg.mode {
        RelayMode::Echo => "echo".to_string(),
        RelayMode::Forward => format!("forward to {}", forward_text.as_deref().unwrap_or("?")),
    };
    println!("relay: listening on {} ({mode})", handle.local_addr());

    if duration_s == 0 {
        loop {
            thread::sleep(Duration::from_secs(3600));
        }
    }
    thread::sleep(Duration::from_secs(duration_s));
    let stats = handle.shutdown();
    println!(
        "relay: received={} relayed={} dropped_invalid={} dropped_injected={} stats_requests={}",
        stats.received,
        stats.relayed,
        stats.dropped_invalid,
        stats.dropped_injected,
        stats.stats_requests
    );
    Ok(())
}
