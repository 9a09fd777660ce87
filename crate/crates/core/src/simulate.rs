//! Synthetic drive-trace generator.
//!
//! Produces a full trace bundle (delay, modem KPI, sniffer KPI, GNSS,
//! ground truth, channel table) from a declarative scenario with a known
//! generative model, so every downstream stage — fusion, analytics,
//! feature selection, training — can be checked against constructed truth.
//!
//! The model couples signal quality and delay through one latent draw: on
//! every 10 ms sniffer tick a standard-normal `u` sets both the tick's
//! RSRP (`center + sigma · u`) and the delay of packets governed by that
//! tick (`base − jitter · u`). Within an eNB, delay is therefore an exact
//! non-increasing function of RSRP — stronger reception, lower delay — up
//! to burst additions and the non-negativity floor. Bursts arrive as a
//! Poisson process per eNB dwell, each adding an exponentially distributed
//! delay surcharge for a fixed window. Coverage gaps mark packets lost and
//! suppress modem/sniffer samples while GNSS keeps reporting.
//!
//! Everything is driven by per-concern seeded RNG streams, so a scenario
//! regenerates bit-identically and config tweaks to one concern (say,
//! gaps) do not reshuffle the randomness of another.

use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{self, CellChannel, GnssFix, IngestError, KpiSample};
use crate::probe::DelayRecord;
use crate::util::atomic_write;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("scenario config: {0}")]
    Config(String),
    #[error("scenario toml: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Probe(#[from] crate::probe::ProbeError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, SimulateError>;

const NS_PER_MS: u64 = 1_000_000;
/// Sniffer tick period; the latent-draw grid.
pub const OAI_TICK_MS: u64 = 10;
/// GNSS cadence.
pub const GNSS_TICK_MS: u64 = 50;
/// Modem cadence.
pub const MODEM_TICK_MS: u64 = 2_000;

fn default_packet_interval_ms() -> u64 {
    40
}

fn default_burst_duration_ms() -> f64 {
    500.0
}

fn default_rsrp_sigma_db() -> f64 {
    4.0
}

fn default_session_id() -> u32 {
    1
}

/// One serving cell's segment of the drive.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnbProfile {
    pub eci: u32,
    pub pci: u16,
    pub band: u8,
    pub earfcn: u32,
    pub bandwidth_mhz: f64,
    /// Mean E2E delay this cell delivers.
    pub base_delay_ms: f64,
    /// Delay spread; couples delay to the tick's RSRP draw.
    #[serde(default)]
    pub delay_jitter_ms: f64,
    pub rsrp_center_dbm: f64,
    #[serde(default = "default_rsrp_sigma_db")]
    pub rsrp_sigma_db: f64,
    /// Poisson rate of delay bursts while served by this cell.
    #[serde(default)]
    pub burst_rate_per_min: f64,
    /// Mean of the exponential burst delay surcharge.
    #[serde(default)]
    pub burst_magnitude_ms: f64,
    /// How long the drive stays on this cell.
    pub dwell_s: u64,
}

/// Out-of-coverage interval (tunnel, dead zone), in seconds from start.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageGap {
    pub start_s: f64,
    pub end_s: f64,
}

/// Smooth sinusoidal speed profile with light measurement noise.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeedProfile {
    pub mean_kmph: f64,
    pub amplitude_kmph: f64,
    pub period_s: f64,
}

impl Default for SpeedProfile {
    fn default() -> Self {
        SpeedProfile {
            mean_kmph: 50.0,
            amplitude_kmph: 20.0,
            period_s: 120.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub duration_s: u64,
    #[serde(default = "default_packet_interval_ms")]
    pub packet_interval_ms: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_session_id")]
    pub session_id: u32,
    /// Serving cells in drive order; dwell times must cover the duration.
    pub enb_sequence: Vec<EnbProfile>,
    #[serde(default)]
    pub coverage_gaps: Vec<CoverageGap>,
    #[serde(default)]
    pub speed: SpeedProfile,
    /// Fixed length of every delay burst.
    #[serde(default = "default_burst_duration_ms")]
    pub burst_duration_ms: f64,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(SimulateError::Config(msg));
        if self.enb_sequence.is_empty() {
            return err("enb_sequence is empty".into());
        }
        if self.packet_interval_ms == 0 {
            return err("packet_interval_ms must be positive".into());
        }
        let dwell_sum: u64 = self.enb_sequence.iter().map(|e| e.dwell_s).sum();
        if dwell_sum != self.duration_s {
            return err(format!(
                "dwell times sum to {dwell_sum} s but duration is {} s",
                self.duration_s
            ));
        }
        for enb in &self.enb_sequence {
            if enb.base_delay_ms <= 0.0 {
                return err(format!("eci {}: base_delay_ms must be positive", enb.eci));
            }
            if enb.delay_jitter_ms < 0.0 || enb.rsrp_sigma_db < 0.0 {
                return err(format!("eci {}: negative spread parameter", enb.eci));
            }
            if enb.burst_rate_per_min < 0.0 || enb.burst_magnitude_ms < 0.0 {
                return err(format!("eci {}: negative burst parameter", enb.eci));
            }
            if enb.pci > ingest::PCI_MAX {
                return err(format!("eci {}: pci {} out of range", enb.eci, enb.pci));
            }
            if enb.eci > ingest::ECI_MAX {
                return err(format!("eci {} exceeds 28-bit range", enb.eci));
            }
            // Fails fast on a band/earfcn combination the mapping rejects.
            ingest::earfcn_to_fc(enb.band, enb.earfcn)?;
        }
        for gap in &self.coverage_gaps {
            if gap.start_s < 0.0 || gap.end_s <= gap.start_s || gap.end_s > self.duration_s as f64 {
                return err(format!(
                    "coverage gap [{}, {}) outside scenario",
                    gap.start_s, gap.end_s
                ));
            }
        }
        Ok(())
    }
}

/// Per-packet generative truth, the oracle for classifier experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRow {
    pub sequence: u64,
    pub eci: u32,
    pub burst_active: bool,
}

/// Everything one scenario run produces.
#[derive(Debug, Clone)]
pub struct TraceBundle {
    pub delays: Vec<DelayRecord>,
    pub modem: Vec<KpiSample>,
    pub oai: Vec<KpiSample>,
    pub gnss: Vec<GnssFix>,
    pub ground_truth: Vec<GroundTruthRow>,
    pub channels: Vec<CellChannel>,
}

impl TraceBundle {
    /// Write the bundle's six CSV files into `dir` (created if needed).
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut buf = Vec::new();
        crate::probe::write_delay_csv(&mut buf, &self.delays)?;
        atomic_write(&dir.join("delay.csv"), &buf)?;

        let mut buf = Vec::new();
        ingest::write_modem_csv(&mut buf, &self.modem)?;
        atomic_write(&dir.join("modem_kpi.csv"), &buf)?;

        let mut buf = Vec::new();
        ingest::write_oai_csv(&mut buf, &self.oai)?;
        atomic_write(&dir.join("oai_kpi.csv"), &buf)?;

        let mut buf = Vec::new();
        ingest::write_gnss_csv(&mut buf, &self.gnss)?;
        atomic_write(&dir.join("gnss.csv"), &buf)?;

        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for row in &self.ground_truth {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        atomic_write(&dir.join("ground_truth.csv"), &buf)?;

        let mut buf = Vec::new();
        ingest::write_channels_csv(&mut buf, &self.channels)?;
        atomic_write(&dir.join("channels.csv"), &buf)?;
        Ok(())
    }
}

pub fn read_ground_truth_csv<R: io::Read>(reader: R) -> Result<Vec<GroundTruthRow>> {
    let mut input = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for row in input.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// One delay burst: [start, end) with a flat surcharge.
#[derive(Debug, Clone, Copy)]
struct Burst {
    start_ns: u64,
    end_ns: u64,
    magnitude_ms: f64,
}

/// The dwell schedule resolved to absolute time.
struct Segment<'a> {
    start_ns: u64,
    end_ns: u64,
    enb: &'a EnbProfile,
}

fn build_segments(cfg: &ScenarioConfig) -> Vec<Segment<'_>> {
    let mut segments = Vec::with_capacity(cfg.enb_sequence.len());
    let mut t = 0u64;
    for enb in &cfg.enb_sequence {
        let end = t + enb.dwell_s * 1_000_000_000;
        segments.push(Segment {
            start_ns: t,
            end_ns: end,
            enb,
        });
        t = end;
    }
    segments
}

fn segment_at<'a>(segments: &'a [Segment<'a>], t_ns: u64) -> &'a Segment<'a> {
    // The last segment also owns its end instant so the final tick of the
    // scenario has a serving cell.
    segments
        .iter()
        .find(|s| t_ns >= s.start_ns && t_ns < s.end_ns)
        .unwrap_or_else(|| segments.last().expect("validated non-empty"))
}

fn in_gap(cfg: &ScenarioConfig, t_ns: u64) -> bool {
    let t_s = t_ns as f64 / 1e9;
    cfg.coverage_gaps
        .iter()
        .any(|g| t_s >= g.start_s && t_s < g.end_s)
}

/// Latent per-tick state shared by the KPI and delay models.
struct TickDraws {
    /// Standard-normal draw per 10 ms tick.
    u: Vec<f64>,
    /// Independent small measurement noises per tick:
    /// [sinr, rsrq, noise_power, rx_power, rssi_jitter].
    noise: Vec<[f64; 5]>,
}

fn draw_ticks(n_ticks: usize, seed: u64) -> TickDraws {
    let mut u_rng = stream_rng(seed, 1);
    let mut n_rng = stream_rng(seed, 2);
    let mut u = Vec::with_capacity(n_ticks);
    let mut noise = Vec::with_capacity(n_ticks);
    for _ in 0..n_ticks {
        u.push(StandardNormal.sample(&mut u_rng));
        noise.push([
            StandardNormal.sample(&mut n_rng),
            StandardNormal.sample(&mut n_rng),
            StandardNormal.sample(&mut n_rng),
            StandardNormal.sample(&mut n_rng),
            n_rng.gen::<f64>(),
        ]);
    }
    TickDraws { u, noise }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_bursts(cfg: &ScenarioConfig, segments: &[Segment<'_>], seed: u64) -> Vec<Burst> {
    let mut rng = stream_rng(seed, 3);
    let mut bursts = Vec::new();
    for segment in segments {
        let rate = segment.enb.burst_rate_per_min;
        if rate <= 0.0 || segment.enb.burst_magnitude_ms <= 0.0 {
            continue;
        }
        let gap_s = Exp::new(rate / 60.0).expect("positive rate");
        let magnitude = Exp::new(1.0 / segment.enb.burst_magnitude_ms).expect("positive mean");
        let mut t = segment.start_ns as f64 / 1e9;
        loop {
            t += gap_s.sample(&mut rng);
            let start_ns = (t * 1e9) as u64;
            if start_ns >= segment.end_ns {
                break;
            }
            bursts.push(Burst {
                start_ns,
                end_ns: start_ns + (cfg.burst_duration_ms * NS_PER_MS as f64) as u64,
                magnitude_ms: magnitude.sample(&mut rng),
            });
        }
    }
    bursts
}

fn burst_surcharge(bursts: &[Burst], t_ns: u64) -> (f64, bool) {
    let mut total = 0.0;
    let mut active = false;
    for b in bursts {
        if t_ns >= b.start_ns && t_ns < b.end_ns {
            total += b.magnitude_ms;
            active = true;
        }
    }
    (total, active)
}

/// Tick-level RSRP: the latent coupling point between signal and delay.
fn tick_rsrp(enb: &EnbProfile, u: f64) -> f64 {
    enb.rsrp_center_dbm + enb.rsrp_sigma_db * u
}

/// Run a scenario.
pub fn generate(cfg: &ScenarioConfig) -> Result<TraceBundle> {
    cfg.validate()?;
    let segments = build_segments(cfg);
    let duration_ns = cfg.duration_s * 1_000_000_000;
    let n_ticks = (cfg.duration_s * 1000 / OAI_TICK_MS) as usize;
    let ticks = draw_ticks(n_ticks, cfg.seed);
    let bursts = draw_bursts(cfg, &segments, cfg.seed);

    // --- sniffer KPI: one sample per tick outside coverage gaps ---
    let mut oai = Vec::with_capacity(n_ticks);
    for (j, (&u, noise)) in ticks.u.iter().zip(&ticks.noise).enumerate() {
        let t_ns = j as u64 * OAI_TICK_MS * NS_PER_MS;
        if in_gap(cfg, t_ns) {
            continue;
        }
        let enb = segment_at(&segments, t_ns).enb;
        let rsrp = tick_rsrp(enb, u);
        let rssi = rsrp + 24.0 + 2.0 * noise[4]; // uniform headroom keeps rssi > rsrp
        let sinr = (rsrp + 110.0) / 2.0 + 0.5 * noise[0];
        let rsrq = -10.5 + 0.4 * noise[1];
        let noise_power = -104.0 + 0.5 * noise[2];
        let rx_power = rssi - 0.5 + 0.2 * noise[3];
        oai.push(KpiSample::oai(
            t_ns, sinr, rssi, rsrp, rsrq, noise_power, rx_power, enb.pci,
        )?);
    }

    // --- modem KPI: slow grid plus an extra report at each handover ---
    let mut modem_times: Vec<u64> = (0..)
        .map(|k| k * MODEM_TICK_MS * NS_PER_MS)
        .take_while(|&t| t < duration_ns)
        .collect();
    for segment in &segments[1..] {
        modem_times.push(segment.start_ns);
    }
    modem_times.sort_unstable();
    modem_times.dedup();
    let mut modem_rng = stream_rng(cfg.seed, 4);
    let mut modem = Vec::with_capacity(modem_times.len());
    for &t_ns in &modem_times {
        // The modem's own measurement wander, independent of the sniffer.
        let wander: f64 = StandardNormal.sample(&mut modem_rng);
        if in_gap(cfg, t_ns) {
            continue;
        }
        let enb = segment_at(&segments, t_ns).enb;
        let tick = (t_ns / (OAI_TICK_MS * NS_PER_MS)) as usize;
        let rsrp = (tick_rsrp(enb, ticks.u[tick]) + 0.5 * wander).round();
        let rssi = rsrp + 25.0;
        let sinr = ((rsrp + 110.0) / 2.0 * 10.0).round() / 10.0;
        let rsrq = -10.5;
        modem.push(KpiSample::modem(
            t_ns, sinr, rssi, rsrp, rsrq, enb.band, enb.earfcn, enb.eci,
        )?);
    }

    // --- GNSS: smooth speed, dead-reckoned position along one heading ---
    let mut gnss_rng = stream_rng(cfg.seed, 5);
    let n_gnss = (cfg.duration_s * 1000 / GNSS_TICK_MS) as usize;
    let mut gnss = Vec::with_capacity(n_gnss);
    let (mut lat, mut lon) = (48.7758, 9.1829);
    for j in 0..n_gnss {
        let t_ns = j as u64 * GNSS_TICK_MS * NS_PER_MS;
        let t_s = t_ns as f64 / 1e9;
        let clean = cfg.speed.mean_kmph
            + cfg.speed.amplitude_kmph * (2.0 * std::f64::consts::PI * t_s / cfg.speed.period_s).sin();
        let jitter: f64 = StandardNormal.sample(&mut gnss_rng);
        let speed = (clean + 0.3 * jitter).max(0.0);
        // 50 ms of travel, degrees ≈ meters / 111111, fixed north-east heading.
        let meters = speed / 3.6 * (GNSS_TICK_MS as f64 / 1e3);
        lat += meters * 0.7071 / 111_111.0;
        lon += meters * 0.7071 / (111_111.0 * lat.to_radians().cos());
        gnss.push(
            GnssFix {
                time_ns: t_ns,
                lat_deg: lat,
                lon_deg: lon,
                speed_kmph: speed,
            }
            .validated()?,
        );
    }

    // --- packets ---
    let n_packets = duration_ns / (cfg.packet_interval_ms * NS_PER_MS);
    let mut delays = Vec::with_capacity(n_packets as usize);
    let mut ground_truth = Vec::with_capacity(n_packets as usize);
    for k in 0..n_packets {
        let t_ns = k * cfg.packet_interval_ms * NS_PER_MS;
        let enb = segment_at(&segments, t_ns).enb;
        let (surcharge, burst_active) = burst_surcharge(&bursts, t_ns);
        ground_truth.push(GroundTruthRow {
            sequence: k,
            eci: enb.eci,
            burst_active,
        });
        if in_gap(cfg, t_ns) {
            delays.push(DelayRecord::lost(cfg.session_id, k, t_ns));
            continue;
        }
        let tick = (t_ns / (OAI_TICK_MS * NS_PER_MS)) as usize;
        let delay_ms = (enb.base_delay_ms - enb.delay_jitter_ms * ticks.u[tick] + surcharge).max(0.1);
        let rx_ns = t_ns + (delay_ms * NS_PER_MS as f64).round() as u64;
        delays.push(DelayRecord::received(cfg.session_id, k, t_ns, rx_ns)?);
    }

    // --- channel table: first-appearance order, deduplicated ---
    let mut channels: Vec<CellChannel> = Vec::new();
    for enb in &cfg.enb_sequence {
        if !channels
            .iter()
            .any(|c| c.band == enb.band && c.earfcn == enb.earfcn)
        {
            channels.push(CellChannel::new(enb.band, enb.earfcn, enb.bandwidth_mhz)?);
        }
    }

    Ok(TraceBundle {
        delays,
        modem,
        oai,
        gnss,
        ground_truth,
        channels,
    })
}
