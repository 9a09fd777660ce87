//! `cvqx record` — capture a synthetic sample stream to disk through the
//! double-buffered recorder, reporting honest loss accounting.

use std::fs::{self, File};
use std::io::BufWriter;
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Serialize;

use cvqx_core::recorder::{run_capture, CaptureConfig, SyntheticSource};

use crate::config::pick;

use super::{echo_effective, Ctx};

#[derive(clap::Args)]
pub struct RecordArgs {
    /// Capture this many seconds at the nominal block cadence.
    #[arg(long, conflicts_with = "blocks")]
    duration_s: Option<u64>,

    /// Capture this many blocks as fast as the pipeline allows
    /// (strain mode; expect losses when the sink cannot keep up).
    #[arg(long)]
    blocks: Option<u64>,

    /// Bytes per block.
    #[arg(long)]
    payload: Option<usize>,

    /// Serializer worker count.
    #[arg(long)]
    serializers: Option<usize>,

    /// How long the producer may wait for a buffer swap, in milliseconds;
    /// 0 drops immediately when both buffers are busy.
    #[arg(long)]
    swap_wait_ms: Option<u64>,

    /// Capture file name inside the output directory.
    #[arg(long)]
    file: Option<String>,
}

#[derive(Serialize)]
struct Effective {
    duration_s: Option<u64>,
    blocks: Option<u64>,
    payload: usize,
    serializers: usize,
    swap_wait_ms: u64,
    file: String,
}

pub fn run(ctx: &Ctx, args: &RecordArgs) -> Result<()> {
    let section = &ctx.cfg.record;
    let defaults = CaptureConfig::default();
    let blocks = args.blocks.or(section.blocks);
    let duration_s = match blocks {
        Some(_) => None,
        None => Some(pick(args.duration_s, section.duration_s, 60)),
    };
    let eff = Effective {
        duration_s,
        blocks,
        payload: pick(args.payload, section.payload, 4096),
        serializers: pick(args.serializers, section.serializers, defaults.serializers),
        swap_wait_ms: pick(
            args.swap_wait_ms,
            section.swap_wait_ms,
            defaults.swap_wait.as_millis() as u64,
        ),
        file: pick(args.file.clone(), section.file.clone(), "capture.bin".into()),
    };
    let seed = ctx.seed_or_default();

    let mut source = match (blocks, duration_s) {
        (Some(blocks), _) => SyntheticSource::new(blocks, eff.payload, seed),
        (None, Some(duration_s)) => SyntheticSource::paced_for(duration_s, eff.payload, seed),
        (None, None) => unreachable!("one of blocks/duration_s is always set"),
    };
    let cfg = CaptureConfig {
        serializers: eff.serializers,
        swap_wait: Duration::from_millis(eff.swap_wait_ms),
    };

    fs::create_dir_all(&ctx.out_dir)
        .with_context(|| format!("cannot create output directory {}", ctx.out_dir.display()))?;
    let path = ctx.out_dir.join(&eff.file);
    let tmp = ctx.out_dir.join(format!("{}.tmp", eff.file));
    let report = {
        let sink = BufWriter::new(
            File::create(&tmp).with_context(|| format!("cannot create {}", tmp.display()))?,
        );
        run_capture(&mut source, sink, &cfg)?
    };
    fs::rename(&tmp, &path)
        .with_context(|| format!("cannot move capture into place at {}", path.display()))?;
    echo_effective(&ctx.out_dir, "record", ctx.seed, &eff)?;

    println!(
        "record: produced={} captured={} lost={} buffers_lost={} max_swap_wait_ms={:.3} -> {}",
        report.blocks_produced,
        report.blocks_captured,
        report.blocks_lost,
        report.buffers_lost,
        report.max_swap_wait.as_secs_f64() * 1e3,
        path.display()
    );
    Ok(())
}
