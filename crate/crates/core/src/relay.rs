//! UDP relay: echoes probe datagrams back to the sender, or forwards them
//! to a downstream target, with optional injected delay and loss for
//! controlled experiments.
//!
//! Echoes preserve the payload byte-for-byte so the sender's embedded
//! timestamp survives the round trip. Datagrams that do not parse as probe
//! packets are dropped and counted, never echoed; a stats datagram (magic
//! `CVQS`) gets a plain-text counter dump in response instead.

use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::probe::wire::looks_valid;

/// Magic prefix of a stats-request datagram ("CVQS").
pub const STATS_MAGIC: [u8; 4] = *b"CVQS";

#[derive(Debug, Error)]
pub enum RelayError {
    #[error("relay {op} failed: {source}")]
    Transport {
        op: &'static str,
        source: std::io::Error,
    },
    #[error("forward mode requires a target address")]
    MissingForwardTarget,
}

pub type Result<T> = std::result::Result<T, RelayError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelayMode {
    /// Send each valid datagram back to its source.
    Echo,
    /// Send each valid datagram on to a fixed downstream address.
    Forward,
}

#[derive(Debug, Clone)]
pub struct RelayConfig {
    pub bind: SocketAddr,
    pub mode: RelayMode,
    /// Downstream address, required in forward mode.
    pub forward_to: Option<SocketAddr>,
    /// Fixed extra delay applied to every relayed datagram.
    pub injected_delay_ms: f64,
    /// Probability in [0, 1] of silently dropping a valid datagram.
    pub injected_loss_rate: f64,
    /// Seed for the loss draw, so experiments repeat exactly.
    pub seed: u64,
}

impl RelayConfig {
    pub fn echo(bind: SocketAddr) -> Self {
        RelayConfig {
            bind,
            mode: RelayMode::Echo,
            forward_to: None,
            injected_delay_ms: 0.0,
            injected_loss_rate: 0.0,
            seed: 0,
        }
    }
}

/// Counters mirrored out of the relay thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct RelayStats {
    pub received: u64,
    pub relayed: u64,
    pub dropped_invalid: u64,
    pub dropped_injected: u64,
    pub stats_requests: u64,
}

#[derive(Default)]
struct Counters {
    received: AtomicU64,
    relayed: AtomicU64,
    dropped_invalid: AtomicU64,
    dropped_injected: AtomicU64,
    stats_requests: AtomicU64,
}

impl Counters {
    fn snapshot(&self) -> RelayStats {
        RelayStats {
            received: self.received.load(Ordering::Relaxed),
            relayed: self.relayed.load(Ordering::Relaxed),
            dropped_invalid: self.dropped_invalid.load(Ordering::Relaxed),
            dropped_injected: self.dropped_injected.load(Ordering::Relaxed),
            stats_requests: self.stats_requests.load(Ordering::Relaxed),
        }
    }

    fn render(&self) -> String {
        let s = self.snapshot();
        format!(
            "received={}\nrelayed={}\ndropped_invalid={}\ndropped_injected={}\nstats_requests={}\n",
            s.received, s.relayed, s.dropped_invalid, s.dropped_injected, s.stats_requests
        )
    }
}

/// A queued datagram waiting out its injected delay.
struct Pending {
    due: Instant,
    payload: Vec<u8>,
    dest: SocketAddr,
}

/// Handle to a running relay; dropping it without `shutdown` leaves the
/// thread running for the life of the process.
pub struct RelayHandle {
    local_addr: SocketAddr,
    counters: Arc<Counters>,
    stop: Arc<AtomicBool>,
    rx_thread: Option<JoinHandle<()>>,
    tx_thread: Option<JoinHandle<()>>,
}

impl RelayHandle {
    /// Address the relay actually bound (resolves port 0).
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn stats(&self) -> RelayStats {
        self.counters.snapshot()
    }

    /// Stop the relay threads and wait for them to exit.
    pub fn shutdown(mut self) -> RelayStats {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.rx_thread.take() {
            t.join().expect("relay rx thread panicked");
        }
        if let Some(t) = self.tx_thread.take() {
            t.join().expect("relay tx thread panicked");
        }
        self.counters.snapshot()
    }
}

fn transport(op: &'static str) -> impl FnOnce(std::io::Error) -> RelayError {
    move |source| RelayError::Transport { op, source }
}

/// Bind and start a relay, returning immediately with its handle.
pub fn serve(cfg: &RelayConfig) -> Result<RelayHandle> {
    if cfg.mode == RelayMode::Forward && cfg.forward_to.is_none() {
        return Err(RelayError::MissingForwardTarget);
    }
    let socket = UdpSocket::bind(cfg.bind).map_err(transport("bind"))?;
    let local_addr = socket.local_addr().map_err(transport("local_addr"))?;
    socket
        .set_read_timeout(Some(Duration::from_millis(20)))
        .map_err(transport("set_read_timeout"))?;
    let tx_socket = socket.try_clone().map_err(transport("clone"))?;

    let counters = Arc::new(Counters::default());
    let stop = Arc::new(AtomicBool::new(false));
    let delay = Duration::from_secs_f64(cfg.injected_delay_ms.max(0.0) / 1e3);
    let loss_rate = cfg.injected_loss_rate.clamp(0.0, 1.0);
    let forward_to = cfg.forward_to;
    let mode = cfg.mode;

    // Delay queue between the receive loop and the send worker. Sends are
    // FIFO because every datagram waits the same fixed delay.
    let (queue_tx, queue_rx) = crossbeam_channel::unbounded::<Pending>();

    let rx_thread = {
        let counters = Arc::clone(&counters);
        let stop = Arc::clone(&stop);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        thread::spawn(move || {
            let mut buf = [0u8; 2048];
            while !stop.load(Ordering::Relaxed) {
                let (n, src) = match socket.recv_from(&mut buf) {
                    Ok(pair) => pair,
                    Err(ref e)
                        if e.kind() == std::io::ErrorKind::WouldBlock
                            || e.kind() == std::io::ErrorKind::TimedOut =>
                    {
                        continue;
                    }
                    Err(_) => break,
                };
                counters.received.fetch_add(1, Ordering::Relaxed);
                let datagram = &buf[..n];
                if datagram.len() >= 4 && datagram[..4] == STATS_MAGIC {
                    counters.stats_requests.fetch_add(1, Ordering::Relaxed);
                    let _ = socket.send_to(counters.render().as_bytes(), src);
                    continue;
                }
                if !looks_valid(datagram) {
                    counters.dropped_invalid.fetch_add(1, Ordering::Relaxed);
                    continue;
                }
                if loss_rate > 0.0 && rng.gen::<f64>() < loss_rate {
                    counters.dropped_injected.fetch_add(1, Ordering::Relaxed);
                    continue;
                }
                let dest = match mode {
                    RelayMode::Echo => src,
                    RelayMode::Forward => forward_to.expect("checked above"),
                };
                let pending = Pending {
                    due: Instant::now() + delay,
                    payload: datagram.to_vec(),
                    dest,
                };
                if queue_tx.send(pending).is_err() {
                    break;
                }
            }
        })
    };

    let tx_thread = {
        let counters = Arc::clone(&counters);
        let stop = Arc::clone(&stop);
        thread::spawn(move || loop {
            match queue_rx.recv_timeout(Duration::from_millis(20)) {
                Ok(pending) => {
                    let now = Instant::now();
                    if pending.due > now {
                        thread::sleep(pending.due - now);
                    }
                    if tx_socket.send_to(&pending.payload, pending.dest).is_ok() {
                        counters.relayed.fetch_add(1, Ordering::Relaxed);
                    }
                }
                Err(crossbeam_channel::RecvTimeoutError::Timeout) => {
                    if stop.load(Ordering::Relaxed) {
                        break;
                    }
                }
                Err(crossbeam_channel::RecvTimeoutError::Disconnected) => break,
            }
        })
    };

    Ok(RelayHandle {
        local_addr,
        counters,
        stop,
        rx_thread: Some(rx_thread),
        tx_thread: Some(tx_thread),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::wire::{encode_packet, ProbePacket};

    fn loopback_relay(cfg_mut: impl FnOnce(&mut RelayConfig)) -> RelayHandle {
        let mut cfg = RelayConfig::echo("127.0.0.1:0".parse().unwrap());
        cfg_mut(&mut cfg);
        serve(&cfg).unwrap()
    }

    fn probe_datagram(sequence: u64) -> Vec<u8> {
        let packet = ProbePacket {
            session_id: 7,
            sequence,
            tx_timestamp_ns: 123,
        };
        encode_packet(&packet, 64).unwrap()
    }

    #[test]
    fn echoes_payload_bytes_back_to_sender() {
        let relay = loopback_relay(|_| {});
        let sock = UdpSocket::bind("127.0.0.1:0").unwrap();
        sock.set_read_timeout(Some(Duration::from_secs(2))).unwrap();
        let datagram = probe_datagram(3);
        sock.send_to(&datagram, relay.local_addr()).unwrap();
        let mut buf = [0u8; 2048];
        let (n, _) = sock.recv_from(&mut buf).unwrap();
        assert_eq!(&buf[..n], &datagram[..]);
        let stats = relay.shutdown();
        assert_eq!(stats.received, 1);
        assert_eq!(stats.relayed, 1);
    }

    #[test]
    fn invalid_datagrams_are_dropped_and_counted() {
        let relay = loopback_relay(|_| {});
        let sock = UdpSocket::bind("127.0.0.1:0").unwrap();
        sock.set_read_timeout(Some(Duration::from_millis(200)))
            .unwrap();
        sock.send_to(b"not a probe packet", relay.local_addr())
            .unwrap();
        let mut buf = [0u8; 64];
        assert!(sock.recv_from(&mut buf).is_err(), "junk must not be echoed");
        let stats = relay.shutdown();
        assert_eq!(stats.dropped_invalid, 1);
        assert_eq!(stats.relayed, 0);
    }

    #[test]
    fn stats_datagram_gets_counter_dump() {
        let relay = loopback_relay(|_| {});
        let sock = UdpSocket::bind("127.0.0.1:0").unwrap();
        sock.set_read_timeout(Some(Duration::from_secs(2))).unwrap();
        sock.send_to(&probe_datagram(0), relay.local_addr()).unwrap();
        let mut buf = [0u8; 2048];
        sock.recv_from(&mut buf).unwrap(); // echo of the probe
        // The send worker bumps `relayed` after the echo leaves its
        // socket, so a stats probe racing that bookkeeping can still see
        // the old count; poll until the increment lands.
        let deadline = Instant::now() + Duration::from_secs(2);
        let text = loop {
            sock.send_to(&STATS_MAGIC, relay.local_addr()).unwrap();
            let (n, _) = sock.recv_from(&mut buf).unwrap();
            let text = std::str::from_utf8(&buf[..n]).unwrap().to_owned();
            if text.contains("relayed=1") || Instant::now() >= deadline {
                break text;
            }
            thread::sleep(Duration::from_millis(10));
        };
        assert!(text.contains("received="), "got: {text}");
        assert!(text.contains("relayed=1"), "got: {text}");
        assert!(text.contains("stats_requests="), "got: {text}");
        relay.shutdown();
    }

    #[test]
    fn injected_loss_drops_a_seeded_fraction() {
        let relay = loopback_relay(|cfg| {
            cfg.injected_loss_rate = 1.0;
        });
        let sock = UdpSocket::bind("127.0.0.1:0").unwrap();
        sock.set_read_timeout(Some(Duration::from_millis(200)))
            .unwrap();
        for k in 0..5 {
            sock.send_to(&probe_datagram(k), relay.local_addr()).unwrap();
        }
        let mut buf = [0u8; 2048];
        assert!(sock.recv_from(&mut buf).is_err());
        let stats = relay.shutdown();
        assert_eq!(stats.dropped_injected, 5);
    }

    #[test]
    fn forward_mode_requires_target() {
        let mut cfg = RelayConfig::echo("127.0.0.1:0".parse().unwrap());
        cfg.mode = RelayMode::Forward;
        assert!(matches!(
            serve(&cfg),
            Err(RelayError::MissingForwardTarget)
        ));
    }

    #[test]
    fn forward_mode_sends_downstream() {
        let sink = UdpSocket::bind("127.0.0.1:0").unwrap();
        sink.set_read_timeout(Some(Duration::from_secs(2))).unwrap();
        let relay = loopback_relay(|cfg| {
            cfg.mode = RelayMode::Forward;
            cfg.forward_to = Some(sink.local_addr().unwrap());
        });
        let sock = UdpSocket::bind("127.0.0.1:0").unwrap();
        let datagram = probe_datagram(9);
        sock.send_to(&datagram, relay.local_addr()).unwrap();
        let mut buf = [0u8; 2048];
        let (n, _) = sink.recv_from(&mut buf).unwrap();
        assert_eq!(&buf[..n], &datagram[..]);
        relay.shutdown();
    }

    #[test]
    fn injected_delay_is_observable_end_to_end() {
        let relay = loopback_relay(|cfg| {
            cfg.injected_delay_ms = 80.0;
        });
        let sock = UdpSocket::bind("127.0.0.1:0").unwrap();
        sock.set_read_timeout(Some(Duration::from_secs(2))).unwrap();
        let started = Instant::now();
        sock.send_to(&probe_datagram(0), relay.local_addr()).unwrap();
        let mut buf = [0u8; 2048];
        sock.recv_from(&mut buf).unwrap();
        let rtt_ms = started.elapsed().as_secs_f64() * 1e3;
        assert!(rtt_ms >= 80.0, "round trip {rtt_ms:.2} ms under injected delay");
        relay.shutdown();
    }
}
