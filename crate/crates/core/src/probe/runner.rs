//! Probe session runner: absolute-schedule sender plus echo receiver.

use std::collections::HashMap;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::wire::{decode_packet, encode_packet, ProbePacket};
use super::{DelayRecord, ProbeError, Result};

#[derive(Debug, Clone)]
pub struct ProbeConfig {
    pub target: SocketAddr,
    pub session_id: u32,
    /// Nominal inter-send interval. Sends are scheduled at `t0 + k * interval`.
    pub interval: Duration,
    /// Total datagram size in octets (header + zero padding).
    pub payload_size: usize,
    /// Number of packets to send.
    pub count: u64,
    /// A packet unanswered this long after its send is marked lost.
    pub timeout: Duration,
    /// Local bind address; an ephemeral port on all interfaces by default.
    pub bind: Option<SocketAddr>,
}

impl ProbeConfig {
    pub fn new(target: SocketAddr, count: u64) -> Self {
        ProbeConfig {
            target,
            session_id: 1,
            interval: Duration::from_millis(40),
            payload_size: 300,
            count,
            timeout: Duration::from_millis(1000),
            bind: None,
        }
    }
}

/// Session metadata reported next to the records.
#[derive(Debug, Clone, Default)]
pub struct RunMeta {
    pub sent: u64,
    pub lost: u64,
    /// Echoes that arrived after the timeout; their packets count as lost.
    pub late: u64,
    /// Datagrams ignored because magic/version/session did not match.
    pub foreign: u64,
    /// Largest deviation of an actual send from its nominal slot
    /// `t0 + k * interval`. The schedule is absolute, so this bounds total
    /// drift as well.
    pub max_schedule_deviation_ms: f64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct ProbeRun {
    /// One record per sent packet, ordered by sequence.
    pub records: Vec<DelayRecord>,
    pub meta: RunMeta,
}

impl ProbeRun {
    /// Mean delay over non-lost records, if any.
    pub fn mean_delay_ms(&self) -> Option<f64> {
        let delays: Vec<f64> = self.records.iter().filter_map(|r| r.e2e_delay_ms).collect();
        if delays.is_empty() {
            None
        } else {
            Some(delays.iter().sum::<f64>() / delays.len() as f64)
        }
    }
}

fn transport(op: &'static str) -> impl FnOnce(std::io::Error) -> ProbeError {
    move |source| ProbeError::Transport { op, source }
}

/// Run one probe session and return a record per sent packet.
///
/// The sender and the receiver run concurrently and report completions
/// into a shared sink; records are assembled in sequence order once the
/// post-send drain window (one timeout) has elapsed.
pub fn run_probe(cfg: &ProbeConfig) -> Result<ProbeRun> {
    if cfg.count == 0 {
        return Ok(ProbeRun {
            records: Vec::new(),
            meta: RunMeta::default(),
        });
    }

    let bind = cfg
        .bind
        .unwrap_or_else(|| "0.0.0.0:0".parse().expect("static addr"));
    let socket = UdpSocket::bind(bind).map_err(transport("bind"))?;
    let rx_socket = socket.try_clone().map_err(transport("clone"))?;
    rx_socket
        .set_read_timeout(Some(Duration::from_millis(20)))
        .map_err(transport("set_read_timeout"))?;

    let epoch = Instant::now();
    // Shared record sink: sender and receiver complete entries independently.
    let echoes: Arc<Mutex<HashMap<u64, u64>>> = Arc::new(Mutex::new(HashMap::new()));
    let foreign = Arc::new(AtomicU64::new(0));
    let stop = Arc::new(AtomicBool::new(false));

    let receiver = {
        let echoes = Arc::clone(&echoes);
        let foreign = Arc::clone(&foreign);
        let stop = Arc::clone(&stop);
        let session_id = cfg.session_id;
        thread::spawn(move || {
            let mut buf = [0u8; 2048];
            while !stop.load(Ordering::Relaxed) {
                match rx_socket.recv_from(&mut buf) {
                    Ok((n, _)) => {
                        let rx_ns = epoch.elapsed().as_nanos() as u64;
                        match decode_packet(&buf[..n]) {
                            Ok(p) if p.session_id == session_id => {
                                // First echo wins; duplicates are ignored.
                                echoes.lock().unwrap().entry(p.sequence).or_insert(rx_ns);
                            }
                            _ => {
                                foreign.fetch_add(1, Ordering::Relaxed);
                            }
                        }
                    }
                    Err(ref e)
                        if e.kind() == std::io::ErrorKind::WouldBlock
                            || e.kind() == std::io::ErrorKind::TimedOut => {}
                    Err(_) => break,
                }
            }
        })
    };

    let mut tx_times = Vec::with_capacity(cfg.count as usize);
    let mut max_deviation = Duration::ZERO;
    let t0 = Instant::now();
    for k in 0..cfg.count {
        let nominal = t0 + cfg.interval * k as u32;
        loop {
            let now = Instant::now();
            if now >= nominal {
                break;
            }
            thread::sleep(nominal - now);
        }
        let tx_ns = epoch.elapsed().as_nanos() as u64;
        max_deviation = max_deviation.max(Instant::now().duration_since(nominal));
        let packet = ProbePacket {
            session_id: cfg.session_id,
            sequence: k,
            tx_timestamp_ns: tx_ns,
        };
        let datagram = encode_packet(&packet, cfg.payload_size)?;
        socket
            .send_to(&datagram, cfg.target)
            .map_err(transport("send_to"))?;
        tx_times.push(tx_ns);
    }

    // Drain window: give the last packets a full timeout to come back.
    thread::sleep(cfg.timeout);
    stop.store(true, Ordering::Relaxed);
    receiver.join().expect("receiver thread panicked");

    let timeout_ms = cfg.timeout.as_secs_f64() * 1e3;
    let echoes = echoes.lock().unwrap();
    let mut records = Vec::with_capacity(cfg.count as usize);
    let mut lost = 0;
    let mut late = 0;
    for k in 0..cfg.count {
        let tx_ns = tx_times[k as usize];
        match echoes.get(&k) {
            Some(&rx_ns) if super::compute_delay(tx_ns, rx_ns)? <= timeout_ms => {
                records.push(DelayRecord::received(cfg.session_id, k, tx_ns, rx_ns)?);
            }
            Some(_) => {
                late += 1;
                lost += 1;
                records.push(DelayRecord::lost(cfg.session_id, k, tx_ns));
            }
            None => {
                lost += 1;
                records.push(DelayRecord::lost(cfg.session_id, k, tx_ns));
            }
        }
    }

    Ok(ProbeRun {
        records,
        meta: RunMeta {
            sent: cfg.count,
            lost,
            late,
            foreign: foreign.load(Ordering::Relaxed),
            max_schedule_deviation_ms: max_deviation.as_secs_f64() * 1e3,
            elapsed: t0.elapsed(),
        },
    })
}
