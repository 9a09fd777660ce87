//! Probe datagram wire format.
//!
//! Network byte order throughout: magic `0x43565158` ("CVQX"), version,
//! session id, sequence number, sender monotonic timestamp, then zero
//! padding up to the configured payload size. The magic and version make
//! the format self-describing so relay and client can evolve
//! independently.

use super::{ProbeError, Result};

pub const MAGIC: u32 = 0x4356_5158;
pub const VERSION: u8 = 0x01;
/// magic(4) + version(1) + session_id(4) + sequence(8) + tx_timestamp_ns(8)
pub const HEADER_LEN: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbePacket {
    pub session_id: u32,
    pub sequence: u64,
    pub tx_timestamp_ns: u64,
}

/// Encode `p` into a datagram of exactly `payload_size` octets.
pub fn encode_packet(p: &ProbePacket, payload_size: usize) -> Result<Vec<u8>> {
    if payload_size < HEADER_LEN {
        return Err(ProbeError::PayloadTooSmall {
            requested: payload_size,
        });
    }
    let mut buf = vec![0u8; payload_size];
    buf[0..4].copy_from_slice(&MAGIC.to_be_bytes());
    buf[4] = VERSION;
    buf[5..9].copy_from_slice(&p.session_id.to_be_bytes());
    buf[9..17].copy_from_slice(&p.sequence.to_be_bytes());
    buf[17..25].copy_from_slice(&p.tx_timestamp_ns.to_be_bytes());
    Ok(buf)
}

/// Decode the header of a probe datagram. Padding beyond the header is
/// ignored, so echoes of any configured payload size decode alike.
pub fn decode_packet(buf: &[u8]) -> Result<ProbePacket> {
    if buf.len() < HEADER_LEN {
        return Err(ProbeError::Truncated { len: buf.len() });
    }
    let magic = u32::from_be_bytes(buf[0..4].try_into().unwrap());
    if magic != MAGIC {
        return Err(ProbeError::BadMagic(magic));
    }
    if buf[4] != VERSION {
        return Err(ProbeError::BadVersion(buf[4]));
    }
    Ok(ProbePacket {
        session_id: u32::from_be_bytes(buf[5..9].try_into().unwrap()),
        sequence: u64::from_be_bytes(buf[9..17].try_into().unwrap()),
        tx_timestamp_ns: u64::from_be_bytes(buf[17..25].try_into().unwrap()),
    })
}

/// Quick validity check used by the relay: magic and version only.
pub fn looks_valid(buf: &[u8]) -> bool {
    buf.len() >= HEADER_LEN && buf[0..4] == MAGIC.to_be_bytes() && buf[4] == VERSION
}
