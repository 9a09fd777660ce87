//! On-disk capture format: length-prefixed, checksummed block frames.
//!
//! All integers little-endian. Each block frame is
//!
//! ```text
//! magic "CVQB" | sequence_index u64 | start_time_ns u64 |
//! source_tag u32 | length u32 | fnv1a64(payload) u64 | payload
//! ```
//!
//! and a clean capture ends with a trailer frame
//!
//! ```text
//! magic "CVQE" | block_count u64
//! ```
//!
//! A file without the trailer is a partial capture (the session aborted
//! mid-write); the reader reports that rather than erroring, because the
//! blocks before the break are still intact and verifiable.

use std::io::{self, Read, Write};
use std::path::Path;

use crate::util::fnv1a64;

use super::source::Block;
use super::{RecorderError, Result};

/// Block frame magic.
pub const BLOCK_MAGIC: [u8; 4] = *b"CVQB";
/// Trailer frame magic.
pub const TRAILER_MAGIC: [u8; 4] = *b"CVQE";

/// Fixed frame header size: magic + sequence + start_time + tag + length +
/// checksum.
const FRAME_HEADER_LEN: usize = 4 + 8 + 8 + 4 + 4 + 8;

/// Frame one block into `out`.
pub fn encode_block(block: &Block, out: &mut Vec<u8>) {
    out.reserve(FRAME_HEADER_LEN + block.payload.len());
    out.extend_from_slice(&BLOCK_MAGIC);
    out.extend_from_slice(&block.sequence_index.to_le_bytes());
    out.extend_from_slice(&block.start_time_ns.to_le_bytes());
    out.extend_from_slice(&block.source_tag.to_le_bytes());
    out.extend_from_slice(&(block.payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&fnv1a64(&block.payload).to_le_bytes());
    out.extend_from_slice(&block.payload);
}

/// Frame a whole buffer of blocks into one contiguous byte run, so the
/// writer commits it with a single call and frames from concurrent
/// serializers can never interleave.
pub fn encode_buffer(blocks: &[Block]) -> Vec<u8> {
    let total: usize = blocks
        .iter()
        .map(|b| FRAME_HEADER_LEN + b.payload.len())
        .sum();
    let mut out = Vec::with_capacity(total);
    for block in blocks {
        encode_block(block, &mut out);
    }
    out
}

pub fn write_trailer<W: Write>(sink: &mut W, block_count: u64) -> io::Result<()> {
    let mut frame = Vec::with_capacity(12);
    frame.extend_from_slice(&TRAILER_MAGIC);
    frame.extend_from_slice(&block_count.to_le_bytes());
    sink.write_all(&frame)
}

/// A parsed capture file.
#[derive(Debug, Clone)]
pub struct CaptureFile {
    pub blocks: Vec<Block>,
    /// True iff the trailer frame was present and consistent.
    pub clean_end: bool,
}

fn read_exact_or_eof<R: Read>(reader: &mut R, buf: &mut [u8]) -> io::Result<Option<()>> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..])? {
            0 if filled == 0 => return Ok(None),
            0 => {
                return Err(io::Error::new(
                    io::ErrorKind::UnexpectedEof,
                    "truncated mid-frame",
                ))
            }
            n => filled += n,
        }
    }
    Ok(Some(()))
}

/// Parse and verify a capture file: magic and checksum per frame, no
/// duplicate sequence indices, blocks in strictly increasing sequence
/// order (the writer contract).
pub fn read_capture<R: Read>(mut reader: R) -> Result<CaptureFile> {
    let mut blocks = Vec::new();
    let mut clean_end = false;
    let mut last_sequence: Option<u64> = None;
    let mut frame_index = 0u64;

    loop {
        let mut magic = [0u8; 4];
        match read_exact_or_eof(&mut reader, &mut magic) {
            Ok(None) => break, // EOF between frames: partial file
            Ok(Some(())) => {}
            Err(e) => return Err(RecorderError::Io(e)),
        }
        if magic == TRAILER_MAGIC {
            let mut count = [0u8; 8];
            reader.read_exact(&mut count)?;
            let declared = u64::from_le_bytes(count);
            if declared != blocks.len() as u64 {
                return Err(RecorderError::BadFrame {
                    index: frame_index,
                    reason: format!(
                        "trailer declares {declared} blocks, file holds {}",
                        blocks.len()
                    ),
                });
            }
            clean_end = true;
            break;
        }
        if magic != BLOCK_MAGIC {
            return Err(RecorderError::BadFrame {
                index: frame_index,
                reason: format!("bad magic {magic:02x?}"),
            });
        }

        let mut head = [0u8; FRAME_HEADER_LEN - 4];
        reader.read_exact(&mut head)?;
        let sequence_index = u64::from_le_bytes(head[0..8].try_into().unwrap());
        let start_time_ns = u64::from_le_bytes(head[8..16].try_into().unwrap());
        let source_tag = u32::from_le_bytes(head[16..20].try_into().unwrap());
        let length = u32::from_le_bytes(head[20..24].try_into().unwrap());
        let checksum = u64::from_le_bytes(head[24..32].try_into().unwrap());

        let mut payload = vec![0u8; length as usize];
        reader.read_exact(&mut payload)?;
        if fnv1a64(&payload) != checksum {
            return Err(RecorderError::BadFrame {
                index: frame_index,
                reason: format!("checksum mismatch on sequence {sequence_index}"),
            });
        }
        match last_sequence {
            Some(last) if sequence_index == last => {
                return Err(RecorderError::DuplicateSequence(sequence_index))
            }
            Some(last) if sequence_index < last => {
                return Err(RecorderError::BadFrame {
                    index: frame_index,
                    reason: format!("sequence {sequence_index} after {last}; file out of order"),
                });
            }
            _ => {}
        }
        last_sequence = Some(sequence_index);
        blocks.push(Block {
            sequence_index,
            start_time_ns,
            source_tag,
            payload,
        });
        frame_index += 1;
    }

    Ok(CaptureFile { blocks, clean_end })
}

pub fn read_capture_path(path: &Path) -> Result<CaptureFile> {
    read_capture(io::BufReader::new(std::fs::File::open(path)?))
}
