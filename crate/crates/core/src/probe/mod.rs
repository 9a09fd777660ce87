//! Sequenced UDP probing and per-packet end-to-end delay records.
//!
//! A probe session sends fixed-size datagrams to a relay at a constant
//! interval on an absolute schedule (`t0 + k * interval`, so scheduling
//! error never accumulates) and matches echoes back to their sequence
//! numbers. Both timestamps of a packet are taken on the sender's
//! monotonic clock, which makes the delay computation exact for the
//! single-host setup this module targets.

mod runner;
pub(crate) mod wire;

pub use runner::{run_probe, ProbeConfig, ProbeRun, RunMeta};
pub use wire::{decode_packet, encode_packet, ProbePacket, HEADER_LEN, MAGIC, VERSION};

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("payload size {requested} below header length {HEADER_LEN}")]
    PayloadTooSmall { requested: usize },
    #[error("datagram too short: {len} bytes, need {HEADER_LEN}")]
    Truncated { len: usize },
    #[error("bad magic 0x{0:08x}")]
    BadMagic(u32),
    #[error("unsupported wire version {0}")]
    BadVersion(u8),
    #[error("rx_time_ns {rx} precedes tx_time_ns {tx}; timestamps must come from one monotonic clock")]
    ClockOrder { tx: u64, rx: u64 },
    #[error("socket {op} failed")]
    Transport {
        op: &'static str,
        #[source]
        source: io::Error,
    },
    #[error("delay csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, ProbeError>;

/// One probe packet's fate: either an echo came back (delay in
/// milliseconds) or it was written off as lost after the timeout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayRecord {
    pub session_id: u32,
    pub sequence: u64,
    pub tx_time_ns: u64,
    pub rx_time_ns: Option<u64>,
    pub e2e_delay_ms: Option<f64>,
    pub lost: bool,
}

impl DelayRecord {
    pub fn received(session_id: u32, sequence: u64, tx_time_ns: u64, rx_time_ns: u64) -> Result<Self> {
        let delay = compute_delay(tx_time_ns, rx_time_ns)?;
        Ok(DelayRecord {
            session_id,
            sequence,
            tx_time_ns,
            rx_time_ns: Some(rx_time_ns),
            e2e_delay_ms: Some(delay),
            lost: false,
        })
    }

    pub fn lost(session_id: u32, sequence: u64, tx_time_ns: u64) -> Self {
        DelayRecord {
            session_id,
            sequence,
            tx_time_ns,
            rx_time_ns: None,
            e2e_delay_ms: None,
            lost: true,
        }
    }
}

/// End-to-end delay in milliseconds from two nanosecond timestamps taken
/// on the same monotonic clock.
///
/// An inverted pair means the timestamps did not come from one clock; that
/// is reported as an error instead of being clamped.
pub fn compute_delay(tx_time_ns: u64, rx_time_ns: u64) -> Result<f64> {
    if rx_time_ns < tx_time_ns {
        return Err(ProbeError::ClockOrder {
            tx: tx_time_ns,
            rx: rx_time_ns,
        });
    }
    Ok((rx_time_ns - tx_time_ns) as f64 / 1e6)
}

/// Header of `delay.csv`, in column order.
pub const DELAY_CSV_HEADER: &str = "session_id,sequence,tx_time_ns,rx_time_ns,e2e_delay_ms,lost";

pub fn write_delay_csv<W: io::Write>(writer: W, records: &[DelayRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for record in records {
        out.serialize(record)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_delay_csv<R: io::Read>(reader: R) -> Result<Vec<DelayRecord>> {
    let mut input = csv::Reader::from_reader(reader);
    let mut records = Vec::new();
    for row in input.deserialize() {
        records.push(row?);
    }
    Ok(records)
}

pub fn read_delay_csv_path(path: &Path) -> Result<Vec<DelayRecord>> {
    read_delay_csv(std::fs::File::open(path)?)
}
