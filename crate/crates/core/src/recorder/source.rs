//! Block producers feeding the capture pipeline.

use std::time::{Duration, Instant};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Nominal duration of one block; the pipeline's real-time unit.
pub const BLOCK_DURATION_MS: u64 = 10;
/// Blocks per buffer: buffers swap every 100 ms of signal.
pub const BLOCKS_PER_BUFFER: usize = 10;

/// One 10 ms slice of captured signal. The payload is opaque to the
/// pipeline; every block in a session carries the same payload size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub sequence_index: u64,
    pub start_time_ns: u64,
    /// Source configuration generation at capture time (e.g. which downlink
    /// channel the front end was tuned to).
    pub source_tag: u32,
    pub payload: Vec<u8>,
}

/// Anything that can produce a session's blocks in sequence order.
pub trait BlockSource {
    /// Payload size of every block this source produces.
    fn block_bytes(&self) -> usize;

    /// Next block, or `None` when the session is over. Pacing (if any) is
    /// the source's responsibility: a real-time source sleeps until the
    /// block's nominal time before returning it.
    fn next_block(&mut self) -> Option<Block>;

    /// Called by the pipeline after every successful buffer swap — the
    /// moment a real front end would retune or adjust gain.
    fn reconfigure(&mut self) {}
}

/// Deterministic pseudo-random source for tests and benchmarks.
///
/// Payload bytes are a pure function of (seed, sequence_index), so an
/// identically configured second instance reproduces the session exactly —
/// that is the oracle for capture losslessness. `reconfigure` bumps a
/// generation counter that subsequent blocks carry as their source tag.
pub struct SyntheticSource {
    total_blocks: u64,
    block_bytes: usize,
    seed: u64,
    produced: u64,
    generation: u32,
    /// When set, block k is released no earlier than `start + k * pace`.
    pace: Option<(Instant, Duration)>,
}

impl SyntheticSource {
    pub fn new(total_blocks: u64, block_bytes: usize, seed: u64) -> Self {
        SyntheticSource {
            total_blocks,
            block_bytes,
            seed,
            produced: 0,
            generation: 0,
            pace: None,
        }
    }

    /// Real-time variant: blocks are released on the nominal 10 ms cadence.
    pub fn paced(total_blocks: u64, block_bytes: usize, seed: u64) -> Self {
        let mut source = Self::new(total_blocks, block_bytes, seed);
        source.pace = Some((
            Instant::now(),
            Duration::from_millis(BLOCK_DURATION_MS),
        ));
        source
    }

    /// Convenience: a paced source covering `duration_s` seconds of signal.
    pub fn paced_for(duration_s: u64, block_bytes: usize, seed: u64) -> Self {
        Self::paced(duration_s * 1000 / BLOCK_DURATION_MS, block_bytes, seed)
    }
}

impl BlockSource for SyntheticSource {
    fn block_bytes(&self) -> usize {
        self.block_bytes
    }

    fn next_block(&mut self) -> Option<Block> {
        if self.produced == self.total_blocks {
            return None;
        }
        let sequence_index = self.produced;
        if let Some((start, pace)) = self.pace {
            let due = start + pace * sequence_index as u32;
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        let mut payload = vec![0u8; self.block_bytes];
        // Per-block stream keyed by (seed, sequence): payloads are
        // reproducible out of order and independent of pacing.
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ sequence_index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        rng.fill_bytes(&mut payload);
        self.produced += 1;
        Some(Block {
            sequence_index,
            start_time_ns: sequence_index * BLOCK_DURATION_MS * 1_000_000,
            source_tag: self.generation,
            payload,
        })
    }

    fn reconfigure(&mut self) {
        self.generation += 1;
    }
}
