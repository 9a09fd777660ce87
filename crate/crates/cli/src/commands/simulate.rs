//! `cvqx simulate` — generate a synthetic drive trace from a scenario file.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

use cvqx_core::simulate::{generate, ScenarioConfig};

use crate::config::require;

use super::{echo_effective, Ctx};

#[derive(clap::Args)]
pub struct SimulateArgs {
    /// Scenario description (TOML).
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,
}

#[derive(Serialize)]
struct Effective {
    scenario: String,
    seed: u64,
    duration_s: u64,
    packet_interval_ms: u64,
    enbs: usize,
}

pub fn run(ctx: &Ctx, args: &SimulateArgs) -> Result<()> {
    let path = require(
        args.scenario.clone(),
        ctx.cfg.simulate.scenario.clone(),
        "simulate scenario file",
    )?;
    let text = fs::read_to_string(&path)
        .with_context(|| format!("cannot read scenario {}", path.display()))?;
    let mut scenario = ScenarioConfig::from_toml(&text)
        .with_context(|| format!("invalid scenario {}", path.display()))?;
    if let Some(seed) = ctx.seed {
        scenario.seed = seed;
    }

    let bundle = generate(&scenario)?;
    bundle.write_dir(&ctx.out_dir)?;
    let eff = Effective {
        scenario: path.display().to_string(),
        seed: scenario.seed,
        duration_s: scenario.duration_s,
        packet_interval_ms: scenario.packet_interval_ms,
        enbs: scenario.enb_sequence.len(),
    };
    echo_effective(&ctx.out_dir, "simulate", Some(scenario.seed), &eff)?;

    let lost = bundle.delays.iter().filter(|d| d.lost).count();
    println!(
        "simulate: {} packets ({} lost), {} modem / {} sniffer / {} gnss samples, {} eNBs -> {}",
        bundle.delays.len(),
        lost,
        bundle.modem.len(),
        bundle.oai.len(),
        bundle.gnss.len(),
        scenario.enb_sequence.len(),
        ctx.out_dir.display()
    );
    Ok(())
}
