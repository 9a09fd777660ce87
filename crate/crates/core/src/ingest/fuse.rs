//! Clock-aligned merge of delay records with KPI and GNSS traces.
//!
//! Every packet joins the freshest sample from each source taken at or
//! before its transmit time (nearest-earlier join). A join only counts if
//! the sample is fresh enough for its source; staler samples leave the
//! fields absent rather than smearing old measurements onto new packets.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::probe::DelayRecord;

use super::{
    check_sorted, earfcn_to_fc, CellChannel, CellMapping, GnssFix, KpiSample, KpiSource, Result,
};

/// Modem identity/KPI staleness bound: the modem refreshes every 1–3 s,
/// so anything older than 4 s is a dead reading.
pub const MODEM_STALENESS_NS: u64 = 4_000_000_000;
/// Sniffer KPI staleness bound (10 ms cadence).
pub const OAI_STALENESS_NS: u64 = 100_000_000;
/// GNSS staleness bound (50 ms cadence).
pub const GNSS_STALENESS_NS: u64 = 200_000_000;

#[derive(Debug, Clone)]
pub struct FuseConfig {
    pub modem_staleness_ns: u64,
    pub oai_staleness_ns: u64,
    pub gnss_staleness_ns: u64,
    /// Constant per-source clock offsets added to sample timestamps before
    /// the join, for rigs where a source clock ran fast or slow.
    pub modem_offset_ns: i64,
    pub oai_offset_ns: i64,
    pub gnss_offset_ns: i64,
    /// Channel table supplying bandwidth per (band, earfcn).
    pub channels: Vec<CellChannel>,
    /// Optional eci→pci mapping used to resolve identity across sources.
    pub mapping: Option<CellMapping>,
}

impl Default for FuseConfig {
    fn default() -> Self {
        FuseConfig {
            modem_staleness_ns: MODEM_STALENESS_NS,
            oai_staleness_ns: OAI_STALENESS_NS,
            gnss_staleness_ns: GNSS_STALENESS_NS,
            modem_offset_ns: 0,
            oai_offset_ns: 0,
            gnss_offset_ns: 0,
            channels: Vec::new(),
            mapping: None,
        }
    }
}

/// One packet with everything known about the link at its transmit time.
/// Absent fields mean the source had no fresh sample. Sniffer KPI columns
/// keep their bare names; modem KPI columns carry a `modem_` prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedRecord {
    pub session_id: u32,
    pub sequence: u64,
    pub tx_time_ns: u64,
    pub rx_time_ns: Option<u64>,
    pub e2e_delay_ms: Option<f64>,
    pub lost: bool,
    // Modem KPI + identity.
    pub modem_sinr_db: Option<f64>,
    pub modem_rssi_dbm: Option<f64>,
    pub modem_rsrp_dbm: Option<f64>,
    pub modem_rsrq_db: Option<f64>,
    pub lte_band: Option<u8>,
    pub earfcn: Option<u32>,
    /// Resolved cell identity (modem-reported, or back-filled through the
    /// pci mapping when only the sniffer was fresh).
    pub eci: Option<u32>,
    // Sniffer KPI.
    pub sinr_db: Option<f64>,
    pub rssi_dbm: Option<f64>,
    pub rsrp_dbm: Option<f64>,
    pub rsrq_db: Option<f64>,
    pub noise_power_dbm: Option<f64>,
    pub rx_power_dbm: Option<f64>,
    /// Resolved physical identity (sniffer-reported, or mapped from eci).
    pub pci: Option<u16>,
    // GNSS.
    pub lat_deg: Option<f64>,
    pub lon_deg: Option<f64>,
    pub speed_kmph: Option<f64>,
    // Channel.
    pub fc_dl_mhz: Option<f64>,
    pub bandwidth_mhz: Option<f64>,
    // Join freshness; absent when the source contributed nothing.
    pub modem_staleness_ns: Option<u64>,
    pub oai_staleness_ns: Option<u64>,
    pub gnss_staleness_ns: Option<u64>,
}

/// Walks one time-sorted sample sequence, yielding for each (ascending)
/// query time the latest sample at or before it.
struct EarlierJoin<'a, T> {
    items: &'a [T],
    time: fn(&T) -> u64,
    offset_ns: i64,
    idx: usize,
}

impl<'a, T> EarlierJoin<'a, T> {
    fn new(items: &'a [T], time: fn(&T) -> u64, offset_ns: i64) -> Self {
        EarlierJoin {
            items,
            time,
            offset_ns,
            idx: 0,
        }
    }

    fn shifted(&self, item: &T) -> u64 {
        ((self.time)(item) as i128 + self.offset_ns as i128).max(0) as u64
    }

    /// Latest sample with shifted time ≤ `at`, plus its staleness.
    fn at(&mut self, at: u64) -> Option<(&'a T, u64)> {
        while self.idx + 1 < self.items.len() && self.shifted(&self.items[self.idx + 1]) <= at {
            self.idx += 1;
        }
        let item = self.items.get(self.idx)?;
        let t = self.shifted(item);
        if t <= at {
            Some((item, at - t))
        } else {
            None
        }
    }
}

/// Join each delay record with the freshest sample from every source.
///
/// All inputs must be time-sorted on the same clock; output order and
/// length mirror `delays`.
pub fn fuse(
    delays: &[DelayRecord],
    modem: &[KpiSample],
    oai: &[KpiSample],
    gnss: &[GnssFix],
    cfg: &FuseConfig,
) -> Result<Vec<FusedRecord>> {
    check_sorted(delays, |d| d.tx_time_ns, "delays")?;
    check_sorted(modem, |s| s.time_ns, "modem")?;
    check_sorted(oai, |s| s.time_ns, "oai")?;
    check_sorted(gnss, |f| f.time_ns, "gnss")?;
    debug_assert!(modem.iter().all(|s| s.source == KpiSource::Modem));
    debug_assert!(oai.iter().all(|s| s.source == KpiSource::Oai));

    let mut modem_join = EarlierJoin::new(modem, |s: &KpiSample| s.time_ns, cfg.modem_offset_ns);
    let mut oai_join = EarlierJoin::new(oai, |s: &KpiSample| s.time_ns, cfg.oai_offset_ns);
    let mut gnss_join = EarlierJoin::new(gnss, |f: &GnssFix| f.time_ns, cfg.gnss_offset_ns);

    let mut fused = Vec::with_capacity(delays.len());
    for delay in delays {
        let t = delay.tx_time_ns;
        let mut record = FusedRecord {
            session_id: delay.session_id,
            sequence: delay.sequence,
            tx_time_ns: t,
            rx_time_ns: delay.rx_time_ns,
            e2e_delay_ms: delay.e2e_delay_ms,
            lost: delay.lost,
            modem_sinr_db: None,
            modem_rssi_dbm: None,
            modem_rsrp_dbm: None,
            modem_rsrq_db: None,
            lte_band: None,
            earfcn: None,
            eci: None,
            sinr_db: None,
            rssi_dbm: None,
            rsrp_dbm: None,
            rsrq_db: None,
            noise_power_dbm: None,
            rx_power_dbm: None,
            pci: None,
            lat_deg: None,
            lon_deg: None,
            speed_kmph: None,
            fc_dl_mhz: None,
            bandwidth_mhz: None,
            modem_staleness_ns: None,
            oai_staleness_ns: None,
            gnss_staleness_ns: None,
        };

        if let Some((s, staleness)) = modem_join.at(t) {
            if staleness <= cfg.modem_staleness_ns {
                record.modem_sinr_db = Some(s.sinr_db);
                record.modem_rssi_dbm = Some(s.rssi_dbm);
                record.modem_rsrp_dbm = Some(s.rsrp_dbm);
                record.modem_rsrq_db = Some(s.rsrq_db);
                record.lte_band = s.lte_band;
                record.earfcn = s.earfcn;
                record.eci = s.eci;
                record.modem_staleness_ns = Some(staleness);
            }
        }
        if let Some((s, staleness)) = oai_join.at(t) {
            if staleness <= cfg.oai_staleness_ns {
                record.sinr_db = Some(s.sinr_db);
                record.rssi_dbm = Some(s.rssi_dbm);
                record.rsrp_dbm = Some(s.rsrp_dbm);
                record.rsrq_db = Some(s.rsrq_db);
                record.noise_power_dbm = s.noise_power_dbm;
                record.rx_power_dbm = s.rx_power_dbm;
                record.pci = s.pci;
                record.oai_staleness_ns = Some(staleness);
            }
        }
        if let Some((f, staleness)) = gnss_join.at(t) {
            if staleness <= cfg.gnss_staleness_ns {
                record.lat_deg = Some(f.lat_deg);
                record.lon_deg = Some(f.lon_deg);
                record.speed_kmph = Some(f.speed_kmph);
                record.gnss_staleness_ns = Some(staleness);
            }
        }

        // Cross-source identity resolution.
        if let Some(mapping) = &cfg.mapping {
            match (record.eci, record.pci) {
                (Some(eci), None) => record.pci = mapping.pci_for(eci),
                (None, Some(pci)) => record.eci = mapping.eci_for(pci),
                _ => {}
            }
        }

        // Channel lookup: bandwidth needs the channel table; the carrier
        // frequency can always be derived from (band, earfcn).
        if let (Some(band), Some(earfcn)) = (record.lte_band, record.earfcn) {
            if let Some(ch) = cfg
                .channels
                .iter()
                .find(|c| c.band == band && c.earfcn == earfcn)
            {
                record.fc_dl_mhz = Some(ch.fc_dl_mhz);
                record.bandwidth_mhz = Some(ch.bandwidth_mhz);
            } else {
                record.fc_dl_mhz = earfcn_to_fc(band, earfcn).ok();
            }
        }

        fused.push(record);
    }
    Ok(fused)
}

pub fn write_fused_csv<W: io::Write>(writer: W, records: &[FusedRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for record in records {
        out.serialize(record)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_fused_csv<R: io::Read>(reader: R) -> Result<Vec<FusedRecord>> {
    let mut input = csv::Reader::from_reader(reader);
    let mut records = Vec::new();
    for row in input.deserialize() {
        records.push(row?);
    }
    Ok(records)
}

pub fn read_fused_csv_path(path: &Path) -> Result<Vec<FusedRecord>> {
    read_fused_csv(std::fs::File::open(path)?)
}

/// Atomic (write-then-rename) variant for pipeline outputs.
pub fn write_fused_csv_path(path: &Path, records: &[FusedRecord]) -> Result<()> {
    let mut bytes = Vec::new();
    write_fused_csv(&mut bytes, records)?;
    crate::util::atomic_write(path, &bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::build_cell_mapping;
    use crate::probe::DelayRecord;

    const MS: u64 = 1_000_000;

    fn delay_at(ms: u64, seq: u64) -> DelayRecord {
        DelayRecord::received(1, seq, ms * MS, ms * MS + 30 * MS).unwrap()
    }

    fn oai_at(ms: u64) -> KpiSample {
        KpiSample::oai(ms * MS, 12.0, -60.0, -85.0, -10.0, -100.0, -61.0, 7).unwrap()
    }

    fn modem_at(ms: u64, eci: u32) -> KpiSample {
        KpiSample::modem(ms * MS, 11.0, -62.0, -86.0, -10.5, 3, 1300, eci).unwrap()
    }

    fn gnss_at(ms: u64, speed: f64) -> GnssFix {
        GnssFix {
            time_ns: ms * MS,
            lat_deg: 48.0,
            lon_deg: 9.0,
            speed_kmph: speed,
        }
    }

    #[test]
    fn joins_nearest_earlier_sample() {
        let delays = vec![delay_at(100, 0)];
        let oai = vec![oai_at(92), oai_at(103)];
        let fused = fuse(&delays, &[], &oai, &[], &FuseConfig::default()).unwrap();
        assert_eq!(fused[0].oai_staleness_ns, Some(8 * MS));
        assert_eq!(fused[0].sinr_db, Some(12.0));
    }

    #[test]
    fn stale_modem_sample_leaves_fields_absent() {
        let delays = vec![delay_at(100_000, 0)];
        let modem = vec![modem_at(3_500, 0xBEEF)]; // 96.5 s earlier
        let fused = fuse(&delays, &modem, &[], &[], &FuseConfig::default()).unwrap();
        assert_eq!(fused[0].eci, None);
        assert_eq!(fused[0].modem_sinr_db, None);
        assert_eq!(fused[0].modem_staleness_ns, None);
    }

    #[test]
    fn exact_tick_alignment_gives_zero_staleness() {
        let delays = vec![delay_at(200, 0)];
        let modem = vec![modem_at(200, 0xC0)];
        let oai = vec![oai_at(200)];
        let gnss = vec![gnss_at(200, 50.0)];
        let fused = fuse(&delays, &modem, &oai, &gnss, &FuseConfig::default()).unwrap();
        assert_eq!(fused[0].modem_staleness_ns, Some(0));
        assert_eq!(fused[0].oai_staleness_ns, Some(0));
        assert_eq!(fused[0].gnss_staleness_ns, Some(0));
        assert_eq!(fused[0].eci, Some(0xC0));
        assert_eq!(fused[0].speed_kmph, Some(50.0));
        // Carrier frequency is derived even without a channel table.
        assert_eq!(fused[0].fc_dl_mhz, Some(1815.0));
        assert_eq!(fused[0].bandwidth_mhz, None);
    }

    #[test]
    fn future_samples_never_join() {
        let delays = vec![delay_at(10, 0)];
        let oai = vec![oai_at(11)];
        let fused = fuse(&delays, &[], &oai, &[], &FuseConfig::default()).unwrap();
        assert_eq!(fused[0].sinr_db, None);
    }

    #[test]
    fn output_length_matches_delays_including_lost() {
        let delays = vec![
            delay_at(10, 0),
            DelayRecord::lost(1, 1, 50 * MS),
            delay_at(90, 2),
        ];
        let fused = fuse(&delays, &[], &[], &[], &FuseConfig::default()).unwrap();
        assert_eq!(fused.len(), 3);
        assert!(fused[1].lost);
    }

    #[test]
    fn mapping_backfills_identity_both_ways() {
        let modem = vec![modem_at(0, 0xAA)];
        let oai = vec![oai_at(1)];
        let mapping = build_cell_mapping(&modem, &oai).unwrap();
        let cfg = FuseConfig {
            mapping: Some(mapping),
            ..FuseConfig::default()
        };
        // Fresh modem join, stale sniffer: pci filled from mapping.
        let fused = fuse(&[delay_at(3_000, 0)], &modem, &oai, &[], &cfg).unwrap();
        assert_eq!(fused[0].eci, Some(0xAA));
        assert_eq!(fused[0].pci, Some(7));
        assert_eq!(fused[0].oai_staleness_ns, None);
        // Fresh sniffer join, no modem: eci filled from mapping.
        let fused = fuse(&[delay_at(50, 0)], &[], &oai, &[], &cfg).unwrap();
        assert_eq!(fused[0].pci, Some(7));
        assert_eq!(fused[0].eci, Some(0xAA));
    }

    #[test]
    fn channel_table_supplies_bandwidth() {
        let cfg = FuseConfig {
            channels: vec![CellChannel::new(3, 1300, 20.0).unwrap()],
            ..FuseConfig::default()
        };
        let fused = fuse(&[delay_at(10, 0)], &[modem_at(0, 1)], &[], &[], &cfg).unwrap();
        assert_eq!(fused[0].fc_dl_mhz, Some(1815.0));
        assert_eq!(fused[0].bandwidth_mhz, Some(20.0));
    }

    #[test]
    fn unsorted_delays_are_rejected() {
        let delays = vec![delay_at(100, 0), delay_at(50, 1)];
        assert!(fuse(&delays, &[], &[], &[], &FuseConfig::default()).is_err());
    }

    #[test]
    fn fused_csv_round_trip() {
        let delays = vec![delay_at(200, 0), DelayRecord::lost(1, 1, 240 * MS)];
        let modem = vec![modem_at(200, 0xC0)];
        let oai = vec![oai_at(200)];
        let gnss = vec![gnss_at(200, 50.0)];
        let fused = fuse(&delays, &modem, &oai, &gnss, &FuseConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_fused_csv(&mut buf, &fused).unwrap();
        let back = read_fused_csv(buf.as_slice()).unwrap();
        assert_eq!(back, fused);
    }

    #[test]
    fn source_offset_shifts_the_join() {
        // The sniffer clock ran 5 ms behind: its timestamps need +5 ms to
        // land on the common clock. A sample logged at 98 ms is really at
        // 103 ms and must not join a packet sent at 100 ms.
        let delays = vec![delay_at(100, 0)];
        let oai = vec![oai_at(98)];
        let cfg = FuseConfig {
            oai_offset_ns: 5 * MS as i64,
            ..FuseConfig::default()
        };
        let fused = fuse(&delays, &[], &oai, &[], &cfg).unwrap();
        assert_eq!(fused[0].sinr_db, None);
    }
}
