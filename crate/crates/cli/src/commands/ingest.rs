//! `cvqx ingest` — validate raw KPI traces, derive the cell-identity
//! mapping and drop sniffer decode artifacts.

use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

use cvqx_core::ingest::{
    build_cell_mapping, read_channels_csv_path, read_gnss_csv_path, read_modem_csv_path,
    read_oai_csv_path, remove_false_positives, write_oai_csv,
};

use crate::config::require;

use super::{echo_effective, write_artifact, Ctx};

#[derive(clap::Args)]
pub struct IngestArgs {
    /// Modem KPI trace (modem_kpi.csv).
    #[arg(long, value_name = "CSV")]
    modem: Option<PathBuf>,

    /// Sniffer KPI trace (oai_kpi.csv).
    #[arg(long, value_name = "CSV")]
    oai: Option<PathBuf>,

    /// GNSS trace; validated only.
    #[arg(long, value_name = "CSV")]
    gnss: Option<PathBuf>,

    /// Channel table; validated only.
    #[arg(long, value_name = "CSV")]
    channels: Option<PathBuf>,
}

#[derive(Serialize)]
struct Effective {
    modem: String,
    oai: String,
    gnss: Option<String>,
    channels: Option<String>,
}

pub fn run(ctx: &Ctx, args: &IngestArgs) -> Result<()> {
    let section = &ctx.cfg.ingest;
    let modem_path = require(args.modem.clone(), section.modem.clone(), "ingest modem trace")?;
    let oai_path = require(args.oai.clone(), section.oai.clone(), "ingest sniffer trace")?;
    let gnss_path = args.gnss.clone().or_else(|| section.gnss.clone());
    let channels_path = args.channels.clone().or_else(|| section.channels.clone());

    let modem = read_modem_csv_path(&modem_path)
        .with_context(|| format!("cannot ingest {}", modem_path.display()))?;
    let oai = read_oai_csv_path(&oai_path)
        .with_context(|| format!("cannot ingest {}", oai_path.display()))?;
    let gnss_count = match &gnss_path {
        Some(path) => {
            read_gnss_csv_path(path)
                .with_context(|| format!("cannot ingest {}", path.display()))?
                .len()
        }
        None => 0,
    };
    let channel_count = match &channels_path {
        Some(path) => {
            read_channels_csv_path(path)
                .with_context(|| format!("cannot ingest {}", path.display()))?
                .len()
        }
        None => 0,
    };

    let mapping = build_cell_mapping(&modem, &oai)?;
    let (clean, removed) = remove_false_positives(&oai, &mapping, &modem)?;

    let mut buf = Vec::new();
    write_oai_csv(&mut buf, &clean)?;
    write_artifact(&ctx.out_dir, "oai_clean.csv", &buf)?;

    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["eci", "pci", "count"])?;
        for (eci, cell) in mapping.iter() {
            w.write_record([eci.to_string(), cell.pci.to_string(), cell.count.to_string()])?;
        }
        w.flush()?;
    }
    write_artifact(&ctx.out_dir, "mapping.csv", &buf)?;

    let eff = Effective {
        modem: modem_path.display().to_string(),
        oai: oai_path.display().to_string(),
        gnss: gnss_path.map(|p| p.display().to_string()),
        channels: channels_path.map(|p| p.display().to_string()),
    };
    echo_effective(&ctx.out_dir, "ingest", ctx.seed, &eff)?;

    println!(
        "ingest: modem={} sniffer={} gnss={} channels={} mapped_cells={} removed_false_positives={} -> {}",
        modem.len(),
        oai.len(),
        gnss_count,
        channel_count,
        mapping.len(),
        removed,
        ctx.out_dir.display()
    );
    Ok(())
}
