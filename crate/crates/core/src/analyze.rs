//! Delay and coverage analytics over fused packet records.
//!
//! Pure functions from records to report structs; each report renders
//! itself as a plot-ready CSV and a short text summary. Lost packets are
//! excluded from every delay statistic and surface as an explicit loss
//! rate instead.

use std::collections::BTreeMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::ingest::FusedRecord;
use crate::probe::DelayRecord;
use crate::util::percentile_nearest_rank;

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("no usable input: {0}")]
    EmptyInput(&'static str),
    #[error("need at least {needed} groups, got {got}")]
    InsufficientGroups { needed: usize, got: usize },
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, AnalyzeError>;

/// Thresholds the drive-test methodology cares about, in ms.
pub const DEFAULT_THRESHOLDS_MS: [f64; 2] = [50.0, 100.0];
/// Default RSRP cut between fair and poor coverage.
pub const DEFAULT_RSRP_THRESHOLD_DBM: f64 = -90.0;

// ---------------------------------------------------------------------------
// Compliance
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdCompliance {
    pub threshold_ms: f64,
    /// Fraction of non-lost packets with delay ≤ threshold.
    pub fraction: f64,
    pub compliant: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplianceReport {
    /// Ascending by threshold; fractions are monotone along it.
    pub thresholds: Vec<ThresholdCompliance>,
    /// Non-lost packets the fractions are computed over.
    pub packets: usize,
    pub lost: usize,
    pub loss_rate: f64,
}

/// Fraction of packets meeting each delay threshold.
pub fn compliance(records: &[DelayRecord], thresholds_ms: &[f64]) -> Result<ComplianceReport> {
    if thresholds_ms.is_empty() {
        return Err(AnalyzeError::BadParam("no thresholds given".into()));
    }
    let delays: Vec<f64> = records.iter().filter_map(|r| r.e2e_delay_ms).collect();
    if delays.is_empty() {
        return Err(AnalyzeError::EmptyInput("every packet is lost or absent"));
    }
    let lost = records.len() - delays.len();
    let mut sorted_thresholds = thresholds_ms.to_vec();
    sorted_thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let thresholds = sorted_thresholds
        .into_iter()
        .map(|threshold_ms| {
            let compliant = delays.iter().filter(|&&d| d <= threshold_ms).count();
            ThresholdCompliance {
                threshold_ms,
                fraction: compliant as f64 / delays.len() as f64,
                compliant,
            }
        })
        .collect();
    Ok(ComplianceReport {
        thresholds,
        packets: delays.len(),
        lost,
        loss_rate: lost as f64 / records.len() as f64,
    })
}

impl ComplianceReport {
    pub fn fraction_at(&self, threshold_ms: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .find(|t| t.threshold_ms == threshold_ms)
            .map(|t| t.fraction)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["threshold_ms", "fraction", "compliant", "packets"])?;
        for t in &self.thresholds {
            out.write_record([
                t.threshold_ms.to_string(),
                t.fraction.to_string(),
                t.compliant.to_string(),
                self.packets.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} packets ({} lost, loss rate {:.4})\n",
            self.packets + self.lost,
            self.lost,
            self.loss_rate
        );
        for t in &self.thresholds {
            s.push_str(&format!(
                "  delay <= {:>6.1} ms: {:6.2}% ({} packets)\n",
                t.threshold_ms,
                t.fraction * 100.0,
                t.compliant
            ));
        }
        s
    }
}

// ---------------------------------------------------------------------------
// Per-eNB statistics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct EnbDelayStats {
    /// None groups packets whose cell identity never resolved.
    pub eci: Option<u32>,
    /// Non-lost packets behind the statistics.
    pub count: usize,
    pub lost: usize,
    /// The per-cell expected-delay feature.
    pub mean_delay_ms: f64,
    pub min_ms: f64,
    pub q1_ms: f64,
    pub median_ms: f64,
    pub q3_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
    /// (threshold_ms, fraction ≤ threshold) pairs, ascending.
    pub compliance: Vec<(f64, f64)>,
}

/// Per-cell delay distributions. Cells whose every packet was lost have no
/// delay distribution and are omitted.
pub fn enb_stats(records: &[FusedRecord], thresholds_ms: &[f64]) -> Vec<EnbDelayStats> {
    let mut groups: BTreeMap<Option<u32>, (Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        let entry = groups.entry(r.eci).or_default();
        match r.e2e_delay_ms {
            Some(d) => entry.0.push(d),
            None => entry.1 += 1,
        }
    }
    let mut sorted_thresholds = thresholds_ms.to_vec();
    sorted_thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut stats = Vec::new();
    for (eci, (mut delays, lost)) in groups {
        if delays.is_empty() {
            continue;
        }
        // Sorting before summation makes the mean a pure function of the
        // multiset of delays — permutation of the input cannot change it.
        delays.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let count = delays.len();
        let mean = delays.iter().sum::<f64>() / count as f64;
        let compliance = sorted_thresholds
            .iter()
            .map(|&t| {
                let compliant = delays.partition_point(|&d| d <= t);
                (t, compliant as f64 / count as f64)
            })
            .collect();
        stats.push(EnbDelayStats {
            eci,
            count,
            lost,
            mean_delay_ms: mean,
            min_ms: delays[0],
            q1_ms: percentile_nearest_rank(&delays, 25.0),
            median_ms: percentile_nearest_rank(&delays, 50.0),
            q3_ms: percentile_nearest_rank(&delays, 75.0),
            p95_ms: percentile_nearest_rank(&delays, 95.0),
            max_ms: delays[count - 1],
            compliance,
        });
    }
    stats
}

fn eci_label(eci: Option<u32>) -> String {
    match eci {
        Some(v) => v.to_string(),
        None => "unknown".to_string(),
    }
}

pub fn write_enb_stats_csv<W: Write>(writer: W, stats: &[EnbDelayStats]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec![
        "eci".to_string(),
        "count".into(),
        "lost".into(),
        "mean_delay_ms".into(),
        "min_ms".into(),
        "q1_ms".into(),
        "median_ms".into(),
        "q3_ms".into(),
        "p95_ms".into(),
        "max_ms".into(),
    ];
    if let Some(first) = stats.first() {
        for (t, _) in &first.compliance {
            header.push(format!("fraction_le_{t}_ms"));
        }
    }
    out.write_record(&header)?;
    for s in stats {
        let mut row = vec![
            eci_label(s.eci),
            s.count.to_string(),
            s.lost.to_string(),
            s.mean_delay_ms.to_string(),
            s.min_ms.to_string(),
            s.q1_ms.to_string(),
            s.median_ms.to_string(),
            s.q3_ms.to_string(),
            s.p95_ms.to_string(),
            s.max_ms.to_string(),
        ];
        for (_, f) in &s.compliance {
            row.push(f.to_string());
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn enb_stats_summary(stats: &[EnbDelayStats]) -> String {
    let mut s = format!("{} cells\n", stats.len());
    for e in stats {
        s.push_str(&format!(
            "  eci {:>10}: n={:<6} mean {:7.2} ms  median {:7.2} ms  p95 {:7.2} ms\n",
            eci_label(e.eci),
            e.count,
            e.mean_delay_ms,
            e.median_ms,
            e.p95_ms
        ));
    }
    s
}

// ---------------------------------------------------------------------------
// Expected-delay feature
// ---------------------------------------------------------------------------

/// Running per-cell mean of observed delays; the feature value for a
/// packet covers strictly earlier packets only, and stays absent until a
/// cell has `warmup_n` of them.
#[derive(Debug, Clone)]
pub struct ExpectedDelayTracker {
    warmup_n: u64,
    state: BTreeMap<u32, (u64, f64)>,
}

impl ExpectedDelayTracker {
    pub fn new(warmup_n: u64) -> Self {
        assert!(warmup_n >= 1, "warmup_n must be at least 1");
        ExpectedDelayTracker {
            warmup_n,
            state: BTreeMap::new(),
        }
    }

    /// Feature value for the current packet, then fold its delay (when it
    /// has one — lost packets update nothing) into the cell's state.
    pub fn observe(&mut self, eci: u32, delay_ms: Option<f64>) -> Option<f64> {
        let (count, sum) = self.state.get(&eci).copied().unwrap_or((0, 0.0));
        let feature = if count >= self.warmup_n {
            Some(sum / count as f64)
        } else {
            None
        };
        if let Some(d) = delay_ms {
            self.state.insert(eci, (count + 1, sum + d));
        }
        feature
    }

    /// Current batch mean for a cell, regardless of warmup.
    pub fn mean_for(&self, eci: u32) -> Option<f64> {
        self.state
            .get(&eci)
            .filter(|(count, _)| *count > 0)
            .map(|(count, sum)| sum / *count as f64)
    }
}

/// Online expected-delay feature aligned with `records`. Packets without a
/// resolved cell get an absent feature.
pub fn expected_delay_online(records: &[FusedRecord], warmup_n: u64) -> Vec<Option<f64>> {
    let mut tracker = ExpectedDelayTracker::new(warmup_n);
    records
        .iter()
        .map(|r| r.eci.and_then(|eci| tracker.observe(eci, r.e2e_delay_ms)))
        .collect()
}

/// Batch per-cell means from a prior trace, for the crowdsourced variant
/// of the feature.
pub fn expected_delay_map(prior: &[FusedRecord]) -> BTreeMap<u32, f64> {
    let mut sums: BTreeMap<u32, (u64, f64)> = BTreeMap::new();
    for r in prior {
        if let (Some(eci), Some(d)) = (r.eci, r.e2e_delay_ms) {
            let e = sums.entry(eci).or_default();
            e.0 += 1;
            e.1 += d;
        }
    }
    sums.into_iter()
        .map(|(eci, (n, sum))| (eci, sum / n as f64))
        .collect()
}

/// Crowdsourced expected-delay feature: look the packet's cell up in a
/// prior map instead of accumulating online.
pub fn expected_delay_crowdsourced(
    records: &[FusedRecord],
    prior: &BTreeMap<u32, f64>,
) -> Vec<Option<f64>> {
    records
        .iter()
        .map(|r| r.eci.and_then(|eci| prior.get(&eci).copied()))
        .collect()
}

// ---------------------------------------------------------------------------
// Coverage
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub threshold_dbm: f64,
    /// Fraction of samples with rsrp ≤ threshold.
    pub fraction_at_or_below: f64,
    pub samples: usize,
    /// CDF sampled at 1 dB steps: (rsrp_dbm, fraction ≤ rsrp_dbm).
    pub cdf: Vec<(f64, f64)>,
}

/// Signal-coverage statistics over RSRP samples.
pub fn coverage_stats(rsrp_dbm: &[f64], threshold_dbm: f64) -> Result<CoverageReport> {
    if rsrp_dbm.is_empty() {
        return Err(AnalyzeError::EmptyInput("no rsrp samples"));
    }
    let mut sorted = rsrp_dbm.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let at_or_below = sorted.partition_point(|&v| v <= threshold_dbm);

    let lo = sorted[0].floor() as i64;
    let hi = sorted[n - 1].ceil() as i64;
    let mut cdf = Vec::with_capacity((hi - lo + 1) as usize);
    for step in lo..=hi {
        let v = step as f64;
        let count = sorted.partition_point(|&x| x <= v);
        cdf.push((v, count as f64 / n as f64));
    }
    Ok(CoverageReport {
        threshold_dbm,
        fraction_at_or_below: at_or_below as f64 / n as f64,
        samples: n,
        cdf,
    })
}

impl CoverageReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["rsrp_dbm", "cdf_fraction"])?;
        for (v, f) in &self.cdf {
            out.write_record([v.to_string(), f.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "{} samples; {:.2}% at or below {} dBm\n",
            self.samples,
            self.fraction_at_or_below * 100.0,
            self.threshold_dbm
        )
    }
}

// ---------------------------------------------------------------------------
// Transmission-interval effect
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalEffectReport {
    /// (interval_ms, mean_delay_ms, count), ascending by interval.
    pub per_interval: Vec<(u64, f64, usize)>,
    /// The largest interval; deltas read "shortening to X saves this much".
    pub reference_interval_ms: u64,
    /// (interval_ms, reference mean − interval mean).
    pub deltas_vs_reference: Vec<(u64, f64)>,
    /// (interval_a, interval_b, mean_b − mean_a) for every pair a < b.
    pub pairwise: Vec<(u64, u64, f64)>,
}

/// Mean-delay comparison across transmission intervals.
pub fn interval_effect(runs: &BTreeMap<u64, Vec<f64>>) -> Result<IntervalEffectReport> {
    let usable: BTreeMap<u64, &Vec<f64>> = runs
        .iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(&k, v)| (k, v))
        .collect();
    if usable.len() < 2 {
        return Err(AnalyzeError::InsufficientGroups {
            needed: 2,
            got: usable.len(),
        });
    }
    let per_interval: Vec<(u64, f64, usize)> = usable
        .iter()
        .map(|(&interval, delays)| {
            let mut sorted = (*delays).clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
            (interval, mean, sorted.len())
        })
        .collect();
    let &(reference_interval_ms, reference_mean, _) =
        per_interval.last().expect("at least two groups");
    let deltas_vs_reference = per_interval
        .iter()
        .map(|&(interval, mean, _)| (interval, reference_mean - mean))
        .collect();
    let mut pairwise = Vec::new();
    for (i, &(a, mean_a, _)) in per_interval.iter().enumerate() {
        for &(b, mean_b, _) in &per_interval[i + 1..] {
            pairwise.push((a, b, mean_b - mean_a));
        }
    }
    Ok(IntervalEffectReport {
        per_interval,
        reference_interval_ms,
        deltas_vs_reference,
        pairwise,
    })
}

impl IntervalEffectReport {
    pub fn delta_for(&self, interval_ms: u64) -> Option<f64> {
        self.deltas_vs_reference
            .iter()
            .find(|(i, _)| *i == interval_ms)
            .map(|(_, d)| *d)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["interval_ms", "mean_delay_ms", "count", "delta_vs_reference_ms"])?;
        for &(interval, mean, count) in &self.per_interval {
            out.write_record([
                interval.to_string(),
                mean.to_string(),
                count.to_string(),
                self.delta_for(interval).unwrap_or(0.0).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = format!("reference interval {} ms\n", self.reference_interval_ms);
        for &(interval, mean, count) in &self.per_interval {
            s.push_str(&format!(
                "  {:>6} ms: mean {:8.2} ms over {:<6} packets (saves {:6.2} ms vs reference)\n",
                interval,
                mean,
                count,
                self.delta_for(interval).unwrap_or(0.0)
            ));
        }
        s
    }
}

// ---------------------------------------------------------------------------
// Time-windowed series
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowPoint {
    pub window_start_ns: u64,
    pub mean: f64,
    pub count: usize,
}

/// Tumbling-window means over (time, value) points; windows with nothing
/// in them are omitted.
pub fn windowed_series(points: &[(u64, f64)], window_ms: u64) -> Result<Vec<WindowPoint>> {
    if window_ms == 0 {
        return Err(AnalyzeError::BadParam("window_ms must be positive".into()));
    }
    let window_ns = window_ms * 1_000_000;
    let mut windows: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for &(t_ns, value) in points {
        let start = (t_ns / window_ns) * window_ns;
        let e = windows.entry(start).or_default();
        e.0 += value;
        e.1 += 1;
    }
    Ok(windows
        .into_iter()
        .map(|(window_start_ns, (sum, count))| WindowPoint {
            window_start_ns,
            mean: sum / count as f64,
            count,
        })
        .collect())
}

/// Windowed mean delay of non-lost packets.
pub fn windowed_delay_series(records: &[DelayRecord], window_ms: u64) -> Result<Vec<WindowPoint>> {
    let points: Vec<(u64, f64)> = records
        .iter()
        .filter_map(|r| r.e2e_delay_ms.map(|d| (r.tx_time_ns, d)))
        .collect();
    windowed_series(&points, window_ms)
}

pub fn write_series_csv<W: Write>(writer: W, series: &[WindowPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["window_start_ms", "mean", "count"])?;
    for p in series {
        out.write_record([
            (p.window_start_ns / 1_000_000).to_string(),
            p.mean.to_string(),
            p.count.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Channel inventory
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelOccupancy {
    pub band: u8,
    pub earfcn: u32,
    pub fc_dl_mhz: Option<f64>,
    pub bandwidth_mhz: Option<f64>,
    pub count: usize,
    /// Percent of channel-attributed records.
    pub percent: f64,
}

/// Per-channel share of records, descending. Records without channel
/// identity are excluded from the percentages and returned as the second
/// element.
pub fn channel_inventory(records: &[FusedRecord]) -> (Vec<ChannelOccupancy>, usize) {
    let mut counts: BTreeMap<(u8, u32), (usize, Option<f64>, Option<f64>)> = BTreeMap::new();
    let mut unattributed = 0usize;
    for r in records {
        match (r.lte_band, r.earfcn) {
            (Some(band), Some(earfcn)) => {
                let e = counts.entry((band, earfcn)).or_insert((0, None, None));
                e.0 += 1;
                e.1 = e.1.or(r.fc_dl_mhz);
                e.2 = e.2.or(r.bandwidth_mhz);
            }
            _ => unattributed += 1,
        }
    }
    let total: usize = counts.values().map(|e| e.0).sum();
    let mut table: Vec<ChannelOccupancy> = counts
        .into_iter()
        .map(|((band, earfcn), (count, fc, bw))| ChannelOccupancy {
            band,
            earfcn,
            fc_dl_mhz: fc,
            bandwidth_mhz: bw,
            count,
            percent: 100.0 * count as f64 / total as f64,
        })
        .collect();
    table.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then(a.band.cmp(&b.band))
            .then(a.earfcn.cmp(&b.earfcn))
    });
    (table, unattributed)
}

pub fn write_channels_report_csv<W: Write>(
    writer: W,
    table: &[ChannelOccupancy],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["band", "earfcn", "fc_dl_mhz", "bandwidth_mhz", "count", "percent"])?;
    for c in table {
        out.write_record([
            c.band.to_string(),
            c.earfcn.to_string(),
            c.fc_dl_mhz.map_or(String::new(), |v| v.to_string()),
            c.bandwidth_mhz.map_or(String::new(), |v| v.to_string()),
            c.count.to_string(),
            c.percent.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn received(seq: u64, t_ms: u64, delay_ms: f64) -> DelayRecord {
        let tx = t_ms * 1_000_000;
        DelayRecord::received(1, seq, tx, tx + (delay_ms * 1e6) as u64).unwrap()
    }

    fn fused(eci: Option<u32>, delay_ms: Option<f64>) -> FusedRecord {
        FusedRecord {
            session_id: 1,
            sequence: 0,
            tx_time_ns: 0,
            rx_time_ns: None,
            e2e_delay_ms: delay_ms,
            lost: delay_ms.is_none(),
            modem_sinr_db: None,
            modem_rssi_dbm: None,
            modem_rsrp_dbm: None,
            modem_rsrq_db: None,
            lte_band: None,
            earfcn: None,
            eci,
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
        }
    }

    #[test]
    fn compliance_counts_fractions() {
        let records = vec![received(0, 0, 40.0), received(1, 40, 60.0), received(2, 80, 110.0)];
        let report = compliance(&records, &[50.0, 100.0]).unwrap();
        assert_relative_eq!(report.fraction_at(50.0).unwrap(), 1.0 / 3.0);
        assert_relative_eq!(report.fraction_at(100.0).unwrap(), 2.0 / 3.0);
        assert_eq!(report.lost, 0);
    }

    #[test]
    fn compliance_is_monotone_and_degenerate_case_is_one() {
        let records: Vec<_> = (0..10).map(|k| received(k, k * 40, 10.0)).collect();
        let report = compliance(&records, &[50.0, 100.0]).unwrap();
        assert_eq!(report.fraction_at(50.0), Some(1.0));
        assert_eq!(report.fraction_at(100.0), Some(1.0));
    }

    #[test]
    fn compliance_excludes_lost_but_reports_them() {
        let mut records = vec![received(0, 0, 40.0), received(1, 40, 60.0)];
        records.push(DelayRecord::lost(1, 2, 80_000_000));
        let report = compliance(&records, &[50.0]).unwrap();
        assert_eq!(report.packets, 2);
        assert_eq!(report.lost, 1);
        assert_relative_eq!(report.fraction_at(50.0).unwrap(), 0.5);
        assert_relative_eq!(report.loss_rate, 1.0 / 3.0);
    }

    #[test]
    fn compliance_of_all_lost_is_an_error() {
        let records = vec![DelayRecord::lost(1, 0, 0)];
        assert!(matches!(
            compliance(&records, &[50.0]),
            Err(AnalyzeError::EmptyInput(_))
        ));
    }

    #[test]
    fn enb_stats_mean_and_grouping() {
        let records = vec![
            fused(Some(1), Some(40.0)),
            fused(Some(1), Some(60.0)),
            fused(Some(2), Some(100.0)),
            fused(None, Some(5.0)),
            fused(Some(2), None),
        ];
        let stats = enb_stats(&records, &DEFAULT_THRESHOLDS_MS);
        assert_eq!(stats.len(), 3);
        let unknown = stats.iter().find(|s| s.eci.is_none()).unwrap();
        assert_eq!(unknown.count, 1);
        let one = stats.iter().find(|s| s.eci == Some(1)).unwrap();
        assert_relative_eq!(one.mean_delay_ms, 50.0);
        assert_eq!(one.compliance, vec![(50.0, 0.5), (100.0, 1.0)]);
        let two = stats.iter().find(|s| s.eci == Some(2)).unwrap();
        assert_eq!(two.lost, 1);
        assert_eq!(two.count, 1);
    }

    #[test]
    fn enb_stats_mean_is_permutation_invariant() {
        let mut records: Vec<FusedRecord> = (0..100)
            .map(|k| fused(Some(7), Some(20.0 + (k as f64) * 0.37)))
            .collect();
        let forward = enb_stats(&records, &[]);
        records.reverse();
        let reverse = enb_stats(&records, &[]);
        assert_eq!(forward[0].mean_delay_ms.to_bits(), reverse[0].mean_delay_ms.to_bits());
    }

    #[test]
    fn expected_delay_warms_up_per_cell() {
        let mut tracker = ExpectedDelayTracker::new(2);
        assert_eq!(tracker.observe(1, Some(40.0)), None);
        assert_eq!(tracker.observe(1, Some(60.0)), None);
        assert_eq!(tracker.observe(1, Some(50.0)), Some(50.0));
        // Handover to a new cell starts cold.
        assert_eq!(tracker.observe(2, Some(10.0)), None);
        // Back to the first cell: state kept, now over three packets.
        assert_relative_eq!(tracker.observe(1, None).unwrap(), 50.0);
    }

    #[test]
    fn expected_delay_final_value_matches_batch_prefix_mean() {
        let delays: Vec<f64> = (0..500).map(|k| 30.0 + ((k * 13) % 17) as f64).collect();
        let mut tracker = ExpectedDelayTracker::new(1);
        let mut last = None;
        for &d in &delays {
            last = tracker.observe(9, Some(d));
        }
        let batch_mean: f64 =
            delays[..delays.len() - 1].iter().sum::<f64>() / (delays.len() - 1) as f64;
        assert_relative_eq!(last.unwrap(), batch_mean, max_relative = 1e-12);
    }

    #[test]
    fn crowdsourced_feature_uses_prior_map() {
        let prior = vec![fused(Some(1), Some(40.0)), fused(Some(1), Some(60.0))];
        let map = expected_delay_map(&prior);
        assert_relative_eq!(map[&1], 50.0);
        let now = vec![fused(Some(1), Some(70.0)), fused(Some(2), Some(10.0))];
        let features = expected_delay_crowdsourced(&now, &map);
        assert_eq!(features, vec![Some(50.0), None]);
    }

    #[test]
    fn coverage_fraction_and_cdf() {
        let report = coverage_stats(&[-95.0, -85.0], -90.0).unwrap();
        assert_relative_eq!(report.fraction_at_or_below, 0.5);
        let report = coverage_stats(&[-80.0, -70.0], -90.0).unwrap();
        assert_eq!(report.fraction_at_or_below, 0.0);
        // CDF ends at 1 and is monotone.
        let report = coverage_stats(&[-100.0, -95.5, -88.0, -80.0], -90.0).unwrap();
        assert_eq!(report.cdf.last().unwrap().1, 1.0);
        for w in report.cdf.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn interval_effect_reference_and_deltas() {
        let mut runs = BTreeMap::new();
        runs.insert(50u64, vec![30.0, 30.0]);
        runs.insert(1000u64, vec![64.34, 64.34]);
        let report = interval_effect(&runs).unwrap();
        assert_eq!(report.reference_interval_ms, 1000);
        assert_relative_eq!(report.delta_for(50).unwrap(), 34.34, epsilon = 1e-12);
        assert_relative_eq!(report.delta_for(1000).unwrap(), 0.0);
        assert_eq!(report.pairwise, vec![(50, 1000, 34.34)]);
    }

    #[test]
    fn identical_distributions_have_zero_delta() {
        let mut runs = BTreeMap::new();
        runs.insert(50u64, vec![20.0, 40.0]);
        runs.insert(100u64, vec![40.0, 20.0]);
        let report = interval_effect(&runs).unwrap();
        assert_relative_eq!(report.delta_for(50).unwrap(), 0.0);
    }

    #[test]
    fn single_interval_is_insufficient() {
        let mut runs = BTreeMap::new();
        runs.insert(50u64, vec![20.0]);
        assert!(matches!(
            interval_effect(&runs),
            Err(AnalyzeError::InsufficientGroups { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn windowed_series_tumbles() {
        let points = vec![(0, 10.0), (100_000_000, 20.0), (300_000_000, 30.0)];
        let series = windowed_series(&points, 250).unwrap();
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].window_start_ns, 0);
        assert_relative_eq!(series[0].mean, 15.0);
        assert_eq!(series[0].count, 2);
        assert_eq!(series[1].window_start_ns, 250_000_000);
        assert_relative_eq!(series[1].mean, 30.0);
    }

    #[test]
    fn windowed_series_conserves_mass() {
        let points: Vec<(u64, f64)> = (0..1000)
            .map(|k| (k * 37_000_000, ((k * 7) % 23) as f64))
            .collect();
        let series = windowed_series(&points, 250).unwrap();
        let mass: f64 = series.iter().map(|p| p.mean * p.count as f64).sum();
        let direct: f64 = points.iter().map(|p| p.1).sum();
        assert_relative_eq!(mass, direct, max_relative = 1e-9);
    }

    #[test]
    fn channel_inventory_percentages() {
        let mut records = Vec::new();
        for _ in 0..80 {
            let mut r = fused(Some(1), Some(10.0));
            r.lte_band = Some(3);
            r.earfcn = Some(1300);
            records.push(r);
        }
        for _ in 0..20 {
            let mut r = fused(Some(2), Some(10.0));
            r.lte_band = Some(20);
            r.earfcn = Some(6300);
            records.push(r);
        }
        records.push(fused(None, Some(10.0))); // no channel identity
        let (table, unattributed) = channel_inventory(&records);
        assert_eq!(unattributed, 1);
        assert_eq!(table.len(), 2);
        assert_relative_eq!(table[0].percent, 80.0);
        assert_eq!(table[0].earfcn, 1300);
        assert_relative_eq!(table[1].percent, 20.0);
        let total: f64 = table.iter().map(|c| c.percent).sum();
        assert_relative_eq!(total, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn single_channel_is_all_of_it() {
        let mut r = fused(Some(1), Some(10.0));
        r.lte_band = Some(3);
        r.earfcn = Some(1300);
        let (table, _) = channel_inventory(&[r]);
        assert_eq!(table.len(), 1);
        assert_relative_eq!(table[0].percent, 100.0);
    }
}
