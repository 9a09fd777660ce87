//! Lossless double-buffered capture pipeline.
//!
//! A producer pulls fixed-size 10 ms blocks from a [`BlockSource`] into the
//! active half of a [`BufferPair`]. When ten blocks have accumulated
//! (100 ms of signal) the pair swaps: the full buffer is handed to a pool
//! of serializer workers while the producer keeps filling the other half.
//! The producer never waits on storage — if the inactive buffer has not
//! drained by the time the next swap is due, the whole active buffer is
//! counted as lost and reused. Loss is therefore the designed, observable
//! failure mode under storage backpressure, never a silent stall of the
//! producer.
//!
//! Serializer workers frame whole buffers concurrently; a single writer
//! commits the framed bytes in handoff order, so blocks appear on disk in
//! sequence order regardless of which worker finished first.

mod framing;
mod source;

pub use framing::{
    read_capture, read_capture_path, CaptureFile, BLOCK_MAGIC, TRAILER_MAGIC,
};
pub use source::{Block, BlockSource, SyntheticSource, BLOCK_DURATION_MS, BLOCKS_PER_BUFFER};

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, RecvTimeoutError, SendTimeoutError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecorderError {
    #[error("sink write failed; capture file is partial")]
    SinkWrite(#[source] io::Error),
    #[error("capture frame {index}: {reason}")]
    BadFrame { index: u64, reason: String },
    #[error("duplicate sequence_index {0} in capture file")]
    DuplicateSequence(u64),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, RecorderError>;

/// Two buffers of ten blocks each; the producer fills the active one while
/// serializers drain the other.
struct BufferPair {
    buffers: [Vec<Block>; 2],
    active: usize,
}

impl BufferPair {
    fn new() -> Self {
        BufferPair {
            buffers: [
                Vec::with_capacity(BLOCKS_PER_BUFFER),
                Vec::with_capacity(BLOCKS_PER_BUFFER),
            ],
            active: 0,
        }
    }

    fn push(&mut self, block: Block) {
        debug_assert!(self.buffers[self.active].len() < BLOCKS_PER_BUFFER);
        self.buffers[self.active].push(block);
    }

    fn active_full(&self) -> bool {
        self.buffers[self.active].len() == BLOCKS_PER_BUFFER
    }

    /// Take the active buffer's contents for handoff and make the other
    /// buffer active. Only called when full.
    fn swap(&mut self) -> Vec<Block> {
        let full = std::mem::replace(
            &mut self.buffers[self.active],
            Vec::with_capacity(BLOCKS_PER_BUFFER),
        );
        self.active = 1 - self.active;
        full
    }

    /// Discard the active buffer's contents after a failed swap.
    fn discard_active(&mut self) -> usize {
        let n = self.buffers[self.active].len();
        self.buffers[self.active].clear();
        n
    }

    fn drain_remaining(&mut self) -> Vec<Block> {
        std::mem::take(&mut self.buffers[self.active])
    }
}

#[derive(Debug, Clone)]
pub struct CaptureConfig {
    /// Serializer worker count.
    pub serializers: usize,
    /// How long the producer may wait for the inactive buffer before
    /// declaring the swap failed. Zero means strict try-swap.
    pub swap_wait: Duration,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        CaptureConfig {
            serializers: 2,
            swap_wait: Duration::ZERO,
        }
    }
}

/// Truthful account of one capture session:
/// `blocks_captured + blocks_lost == blocks_produced` always.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CaptureReport {
    pub blocks_produced: u64,
    pub blocks_captured: u64,
    pub blocks_lost: u64,
    pub buffers_lost: u64,
    pub max_swap_wait: Duration,
}

/// Run a capture session: drain `source` to exhaustion through the
/// double-buffered pipeline into `sink`.
///
/// On success the file ends with a trailer frame marking a clean end; a
/// sink failure aborts the session and leaves the file without it.
pub fn run_capture<S, W>(source: &mut S, sink: W, cfg: &CaptureConfig) -> Result<CaptureReport>
where
    S: BlockSource,
    W: Write + Send,
{
    assert!(cfg.serializers >= 1, "need at least one serializer");

    // handoff: the "inactive buffer" slot. Capacity 1: a swap succeeds only
    // if the previously handed-off buffer has been claimed for draining.
    let (handoff_tx, handoff_rx) = bounded::<(u64, Vec<Block>)>(1);
    // encoded: framed buffers on their way to the writer, keyed by handoff
    // index so the writer can restore order; the block count rides along
    // for the report.
    let (encoded_tx, encoded_rx) = bounded::<(u64, u64, Vec<u8>)>(cfg.serializers);

    let sink_error: Mutex<Option<io::Error>> = Mutex::new(None);
    let mut report = CaptureReport::default();
    let mut captured_by_writer = 0u64;

    std::thread::scope(|scope| {
        for _ in 0..cfg.serializers {
            let handoff_rx = handoff_rx.clone();
            let encoded_tx = encoded_tx.clone();
            scope.spawn(move || {
                while let Ok((index, blocks)) = handoff_rx.recv() {
                    let bytes = framing::encode_buffer(&blocks);
                    if encoded_tx.send((index, blocks.len() as u64, bytes)).is_err() {
                        break; // writer gone (sink failure)
                    }
                }
            });
        }
        drop(handoff_rx);
        drop(encoded_tx);

        let writer = scope.spawn(|| {
            // Own the receiver: if this thread exits early on a sink error,
            // dropping it disconnects the serializers (their send fails)
            // and through them the producer, so the whole scope unwinds
            // instead of deadlocking on a full channel.
            let encoded_rx = encoded_rx;
            let mut sink = sink;
            let mut pending: BTreeMap<u64, (u64, Vec<u8>)> = BTreeMap::new();
            let mut next_index = 0u64;
            let mut written_blocks = 0u64;
            loop {
                match encoded_rx.recv_timeout(Duration::from_millis(50)) {
                    Ok((index, n_blocks, bytes)) => {
                        pending.insert(index, (n_blocks, bytes));
                        while let Some((n_blocks, bytes)) = pending.remove(&next_index) {
                            if let Err(e) = sink.write_all(&bytes) {
                                *sink_error.lock().unwrap() = Some(e);
                                return written_blocks;
                            }
                            written_blocks += n_blocks;
                            next_index += 1;
                        }
                    }
                    Err(RecvTimeoutError::Timeout) => continue,
                    Err(RecvTimeoutError::Disconnected) => break,
                }
            }
            debug_assert!(pending.is_empty(), "no handoff index may be skipped");
            if let Err(e) = framing::write_trailer(&mut sink, written_blocks) {
                *sink_error.lock().unwrap() = Some(e);
                return written_blocks;
            }
            if let Err(e) = sink.flush() {
                *sink_error.lock().unwrap() = Some(e);
            }
            written_blocks
        });

        let mut pair = BufferPair::new();
        let mut handoff_index = 0u64;
        let mut aborted = false;

        'produce: while let Some(block) = source.next_block() {
            report.blocks_produced += 1;
            pair.push(block);
            if !pair.active_full() {
                continue;
            }
            let full = pair.swap();
            let waited = Instant::now();
            match handoff_tx.send_timeout((handoff_index, full), cfg.swap_wait) {
                Ok(()) => {
                    handoff_index += 1;
                    report.max_swap_wait = report.max_swap_wait.max(waited.elapsed());
                    source.reconfigure();
                }
                Err(SendTimeoutError::Timeout(_)) => {
                    // Inactive buffer still draining: the buffer we just
                    // swapped out is lost in full, production continues.
                    report.max_swap_wait = report.max_swap_wait.max(waited.elapsed());
                    report.blocks_lost += BLOCKS_PER_BUFFER as u64;
                    report.buffers_lost += 1;
                }
                Err(SendTimeoutError::Disconnected(_)) => {
                    aborted = true;
                    break 'produce;
                }
            }
        }

        if !aborted {
            // Source exhausted: the tail (possibly partial) buffer is not
            // subject to the real-time swap contract — block until the
            // pipeline accepts it.
            let tail = pair.drain_remaining();
            if !tail.is_empty() && handoff_tx.send((handoff_index, tail)).is_err() {
                // Writer died on the very tail; counted below via sink_error.
            }
        } else {
            report.blocks_lost += pair.discard_active() as u64;
        }
        drop(handoff_tx);

        captured_by_writer = writer.join().expect("writer thread panicked");
    });

    if let Some(e) = sink_error.into_inner().unwrap().take() {
        return Err(RecorderError::SinkWrite(e));
    }
    report.blocks_captured = captured_by_writer;
    debug_assert_eq!(
        report.blocks_captured + report.blocks_lost,
        report.blocks_produced,
        "capture report must be truthful"
    );
    Ok(report)
}
