//! KPI trace ingestion and per-packet fusion.
//!
//! Three trace sources feed this module: the modem KPI log (slow cadence,
//! carries cell identity), the downlink sniffer KPI log (10 ms cadence,
//! carries PCI), and the GNSS log. Ingestion validates each row, resolves
//! cell identity (EARFCN→frequency, PCI↔ECI mapping, false-positive
//! removal) and joins everything onto the per-packet delay records to form
//! one flat `FusedRecord` per packet.

mod earfcn;
mod fuse;
mod mapping;

pub use earfcn::{earfcn_to_fc, supported_bands};
pub use fuse::{fuse, read_fused_csv, read_fused_csv_path, write_fused_csv, write_fused_csv_path, FuseConfig, FusedRecord, MODEM_STALENESS_NS, OAI_STALENESS_NS, GNSS_STALENESS_NS};
pub use mapping::{build_cell_mapping, remove_false_positives, CellMapping, MappedCell};

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unsupported LTE band {0}")]
    UnsupportedBand(u8),
    #[error("earfcn {earfcn} outside band {band} downlink range {lo}..={hi}")]
    EarfcnOutOfRange { band: u8, earfcn: u32, lo: u32, hi: u32 },
    #[error("invalid {kind} sample at t={time_ns} ns: {reason}")]
    InvalidSample {
        kind: &'static str,
        time_ns: u64,
        reason: String,
    },
    #[error("{source_name} input not time-sorted at index {index}")]
    Unsorted {
        source_name: &'static str,
        index: usize,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// Which instrument produced a KPI sample. The modem reports cell identity
/// (band, earfcn, ECI); the sniffer reports receive-chain detail and PCI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KpiSource {
    Modem,
    Oai,
}

/// One KPI measurement row. Identity fields are present or absent
/// according to the source; see the constructors.
#[derive(Debug, Clone, PartialEq)]
pub struct KpiSample {
    pub time_ns: u64,
    pub source: KpiSource,
    pub sinr_db: f64,
    pub rssi_dbm: f64,
    pub rsrp_dbm: f64,
    pub rsrq_db: f64,
    /// Sniffer only.
    pub noise_power_dbm: Option<f64>,
    /// Sniffer only.
    pub rx_power_dbm: Option<f64>,
    /// Sniffer only; 0..=503.
    pub pci: Option<u16>,
    /// Modem only.
    pub lte_band: Option<u8>,
    /// Modem only.
    pub earfcn: Option<u32>,
    /// Modem only; 28-bit cell identity.
    pub eci: Option<u32>,
}

/// Largest value a 28-bit ECI can take.
pub const ECI_MAX: u32 = (1 << 28) - 1;
/// Largest valid PCI.
pub const PCI_MAX: u16 = 503;

fn check_signal(kind: &'static str, time_ns: u64, rsrp_dbm: f64, rssi_dbm: f64) -> Result<()> {
    if rsrp_dbm > rssi_dbm {
        return Err(IngestError::InvalidSample {
            kind,
            time_ns,
            reason: format!("rsrp {rsrp_dbm} dBm exceeds rssi {rssi_dbm} dBm"),
        });
    }
    Ok(())
}

impl KpiSample {
    #[allow(clippy::too_many_arguments)]
    pub fn modem(
        time_ns: u64,
        sinr_db: f64,
        rssi_dbm: f64,
        rsrp_dbm: f64,
        rsrq_db: f64,
        lte_band: u8,
        earfcn: u32,
        eci: u32,
    ) -> Result<Self> {
        check_signal("modem", time_ns, rsrp_dbm, rssi_dbm)?;
        if eci > ECI_MAX {
            return Err(IngestError::InvalidSample {
                kind: "modem",
                time_ns,
                reason: format!("eci {eci} exceeds 28-bit range"),
            });
        }
        Ok(KpiSample {
            time_ns,
            source: KpiSource::Modem,
            sinr_db,
            rssi_dbm,
            rsrp_dbm,
            rsrq_db,
            noise_power_dbm: None,
            rx_power_dbm: None,
            pci: None,
            lte_band: Some(lte_band),
            earfcn: Some(earfcn),
            eci: Some(eci),
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn oai(
        time_ns: u64,
        sinr_db: f64,
        rssi_dbm: f64,
        rsrp_dbm: f64,
        rsrq_db: f64,
        noise_power_dbm: f64,
        rx_power_dbm: f64,
        pci: u16,
    ) -> Result<Self> {
        check_signal("oai", time_ns, rsrp_dbm, rssi_dbm)?;
        if pci > PCI_MAX {
            return Err(IngestError::InvalidSample {
                kind: "oai",
                time_ns,
                reason: format!("pci {pci} outside 0..={PCI_MAX}"),
            });
        }
        Ok(KpiSample {
            time_ns,
            source: KpiSource::Oai,
            sinr_db,
            rssi_dbm,
            rsrp_dbm,
            rsrq_db,
            noise_power_dbm: Some(noise_power_dbm),
            rx_power_dbm: Some(rx_power_dbm),
            pci: Some(pci),
            lte_band: None,
            earfcn: None,
            eci: None,
        })
    }
}

/// One GNSS position/speed fix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnssFix {
    pub time_ns: u64,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub speed_kmph: f64,
}

impl GnssFix {
    pub fn validated(self) -> Result<Self> {
        let bad = |reason: String| IngestError::InvalidSample {
            kind: "gnss",
            time_ns: self.time_ns,
            reason,
        };
        if self.lat_deg.abs() > 90.0 {
            return Err(bad(format!("latitude {} out of range", self.lat_deg)));
        }
        if self.lon_deg.abs() > 180.0 {
            return Err(bad(format!("longitude {} out of range", self.lon_deg)));
        }
        if self.speed_kmph < 0.0 {
            return Err(bad(format!("negative speed {}", self.speed_kmph)));
        }
        Ok(self)
    }
}

/// One downlink channel: band + earfcn with the derived carrier frequency
/// and the configured bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellChannel {
    pub band: u8,
    pub earfcn: u32,
    pub fc_dl_mhz: f64,
    pub bandwidth_mhz: f64,
}

impl CellChannel {
    pub fn new(band: u8, earfcn: u32, bandwidth_mhz: f64) -> Result<Self> {
        Ok(CellChannel {
            band,
            earfcn,
            fc_dl_mhz: earfcn_to_fc(band, earfcn)?,
            bandwidth_mhz,
        })
    }
}

// ---------------------------------------------------------------------------
// CSV row formats. Headers are part of the external contract:
//   modem_kpi.csv: time_ns,sinr_db,rssi_dbm,rsrp_dbm,rsrq_db,lte_band,earfcn,eci
//   oai_kpi.csv:   time_ns,sinr_db,rssi_dbm,rsrp_dbm,rsrq_db,noise_power_dbm,rx_power_dbm,pci
//   gnss.csv:      time_ns,lat_deg,lon_deg,speed_kmph
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ModemRow {
    time_ns: u64,
    sinr_db: f64,
    rssi_dbm: f64,
    rsrp_dbm: f64,
    rsrq_db: f64,
    lte_band: u8,
    earfcn: u32,
    eci: u32,
}

#[derive(Serialize, Deserialize)]
struct OaiRow {
    time_ns: u64,
    sinr_db: f64,
    rssi_dbm: f64,
    rsrp_dbm: f64,
    rsrq_db: f64,
    noise_power_dbm: f64,
    rx_power_dbm: f64,
    pci: u16,
}

pub fn read_modem_csv<R: io::Read>(reader: R) -> Result<Vec<KpiSample>> {
    let mut input = csv::Reader::from_reader(reader);
    let mut samples = Vec::new();
    for row in input.deserialize::<ModemRow>() {
        let r = row?;
        samples.push(KpiSample::modem(
            r.time_ns, r.sinr_db, r.rssi_dbm, r.rsrp_dbm, r.rsrq_db, r.lte_band, r.earfcn, r.eci,
        )?);
    }
    Ok(samples)
}

pub fn read_oai_csv<R: io::Read>(reader: R) -> Result<Vec<KpiSample>> {
    let mut input = csv::Reader::from_reader(reader);
    let mut samples = Vec::new();
    for row in input.deserialize::<OaiRow>() {
        let r = row?;
        samples.push(KpiSample::oai(
            r.time_ns,
            r.sinr_db,
            r.rssi_dbm,
            r.rsrp_dbm,
            r.rsrq_db,
            r.noise_power_dbm,
            r.rx_power_dbm,
            r.pci,
        )?);
    }
    Ok(samples)
}

pub fn read_gnss_csv<R: io::Read>(reader: R) -> Result<Vec<GnssFix>> {
    let mut input = csv::Reader::from_reader(reader);
    let mut fixes = Vec::new();
    for row in input.deserialize::<GnssFix>() {
        fixes.push(row?.validated()?);
    }
    Ok(fixes)
}

pub fn write_modem_csv<W: io::Write>(writer: W, samples: &[KpiSample]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for s in samples {
        debug_assert_eq!(s.source, KpiSource::Modem);
        out.serialize(ModemRow {
            time_ns: s.time_ns,
            sinr_db: s.sinr_db,
            rssi_dbm: s.rssi_dbm,
            rsrp_dbm: s.rsrp_dbm,
            rsrq_db: s.rsrq_db,
            lte_band: s.lte_band.unwrap_or(0),
            earfcn: s.earfcn.unwrap_or(0),
            eci: s.eci.unwrap_or(0),
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_oai_csv<W: io::Write>(writer: W, samples: &[KpiSample]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for s in samples {
        debug_assert_eq!(s.source, KpiSource::Oai);
        out.serialize(OaiRow {
            time_ns: s.time_ns,
            sinr_db: s.sinr_db,
            rssi_dbm: s.rssi_dbm,
            rsrp_dbm: s.rsrp_dbm,
            rsrq_db: s.rsrq_db,
            noise_power_dbm: s.noise_power_dbm.unwrap_or(0.0),
            rx_power_dbm: s.rx_power_dbm.unwrap_or(0.0),
            pci: s.pci.unwrap_or(0),
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_gnss_csv<W: io::Write>(writer: W, fixes: &[GnssFix]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for f in fixes {
        out.serialize(f)?;
    }
    out.flush()?;
    Ok(())
}

/// `channels.csv` sidecar: band,earfcn,bandwidth_mhz. Carries the channel
/// bandwidth, which no KPI trace reports; the carrier frequency is derived.
#[derive(Serialize, Deserialize)]
struct ChannelRow {
    band: u8,
    earfcn: u32,
    bandwidth_mhz: f64,
}

pub fn read_channels_csv<R: io::Read>(reader: R) -> Result<Vec<CellChannel>> {
    let mut input = csv::Reader::from_reader(reader);
    let mut channels = Vec::new();
    for row in input.deserialize::<ChannelRow>() {
        let r = row?;
        channels.push(CellChannel::new(r.band, r.earfcn, r.bandwidth_mhz)?);
    }
    Ok(channels)
}

pub fn write_channels_csv<W: io::Write>(writer: W, channels: &[CellChannel]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for c in channels {
        out.serialize(ChannelRow {
            band: c.band,
            earfcn: c.earfcn,
            bandwidth_mhz: c.bandwidth_mhz,
        })?;
    }
    out.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<std::fs::File> {
    Ok(std::fs::File::open(path)?)
}

pub fn read_modem_csv_path(path: &Path) -> Result<Vec<KpiSample>> {
    read_modem_csv(open(path)?)
}

pub fn read_oai_csv_path(path: &Path) -> Result<Vec<KpiSample>> {
    read_oai_csv(open(path)?)
}

pub fn read_gnss_csv_path(path: &Path) -> Result<Vec<GnssFix>> {
    read_gnss_csv(open(path)?)
}

pub fn read_channels_csv_path(path: &Path) -> Result<Vec<CellChannel>> {
    read_channels_csv(open(path)?)
}

pub(crate) fn ensure_sorted_by_time<T, F: Fn(&T) -> u64>(
    items: &[T],
    key: F,
    source_name: &'static str,
) -> Result<()> {
    for (index, pair) in items.windows(2).enumerate() {
        if key(&pair[1]) < key(&pair[0]) {
            return Err(IngestError::Unsorted {
                source_name,
                index: index + 1,
            });
        }
    }
    Ok(())
}

pub(crate) use ensure_sorted_by_time as check_sorted;
