//! PCI↔ECI resolution.
//!
//! The modem reports the network-level cell identity (ECI) at a slow
//! cadence; the sniffer reports the physical-layer identity (PCI) every
//! 10 ms. Within each maximal time window where the modem reports one
//! constant ECI, the PCI values seen by the sniffer are counted, and the
//! majority PCI becomes that cell's physical identity. Sniffer rows whose
//! PCI contradicts the mapping for the concurrently reported ECI are
//! decoding false positives and get removed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_sorted, KpiSample, Result};

/// The resolved physical identity of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappedCell {
    pub pci: u16,
    /// Sniffer samples supporting the winning PCI.
    pub count: u64,
}

/// eci → pci mapping with supporting evidence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellMapping {
    entries: BTreeMap<u32, MappedCell>,
    /// ECIs whose connected windows contained no sniffer samples.
    pub unmapped_ecis: Vec<u32>,
}

impl CellMapping {
    pub fn pci_for(&self, eci: u32) -> Option<u16> {
        self.entries.get(&eci).map(|m| m.pci)
    }

    pub fn get(&self, eci: u32) -> Option<&MappedCell> {
        self.entries.get(&eci)
    }

    /// The unique ECI mapped to `pci`, if exactly one exists.
    pub fn eci_for(&self, pci: u16) -> Option<u32> {
        let mut found = None;
        for (&eci, cell) in &self.entries {
            if cell.pci == pci {
                if found.is_some() {
                    return None;
                }
                found = Some(eci);
            }
        }
        found
    }

    pub fn iter(&self) -> impl Iterator<Item = (&u32, &MappedCell)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Evidence for one (eci, pci) pair: how often they co-occurred and when
/// the pair was first seen (the deterministic tie-breaker).
#[derive(Debug, Clone, Copy)]
struct PairEvidence {
    count: u64,
    first_seen_ns: u64,
}

/// Estimate the eci → pci mapping from time-aligned modem and sniffer
/// KPI streams.
///
/// For every maximal constant-ECI window of the modem timeline, sniffer
/// samples falling inside the window vote for their PCI. Votes for an ECI
/// accumulate across its windows (a cell may serve several times in one
/// drive). The winner is the PCI with the most votes; ties go to the PCI
/// first observed with that ECI, then to the numerically smaller PCI, so
/// the result is independent of input permutation within equal timestamps.
pub fn build_cell_mapping(modem: &[KpiSample], oai: &[KpiSample]) -> Result<CellMapping> {
    check_sorted(modem, |s| s.time_ns, "modem")?;
    check_sorted(oai, |s| s.time_ns, "oai")?;

    // (eci, pci) → evidence, plus a per-eci flag that the cell's windows
    // overlapped at least one sniffer sample.
    let mut evidence: BTreeMap<(u32, u16), PairEvidence> = BTreeMap::new();
    let mut saw_oai: BTreeMap<u32, bool> = BTreeMap::new();

    let mut oai_idx = 0usize;
    let mut window = 0usize;
    while window < modem.len() {
        let eci = modem[window].eci.expect("modem samples carry eci");
        // Extend to the maximal run of samples reporting this eci.
        let mut end = window + 1;
        while end < modem.len() && modem[end].eci == Some(eci) {
            end += 1;
        }
        let window_start = modem[window].time_ns;
        let window_end = modem.get(end).map_or(u64::MAX, |s| s.time_ns);

        saw_oai.entry(eci).or_insert(false);
        while oai_idx < oai.len() && oai[oai_idx].time_ns < window_end {
            let sample = &oai[oai_idx];
            oai_idx += 1;
            if sample.time_ns < window_start {
                continue; // before the modem reported anything
            }
            let pci = sample.pci.expect("oai samples carry pci");
            saw_oai.insert(eci, true);
            evidence
                .entry((eci, pci))
                .and_modify(|e| e.count += 1)
                .or_insert(PairEvidence {
                    count: 1,
                    first_seen_ns: sample.time_ns,
                });
        }
        window = end;
    }

    let mut mapping = CellMapping::default();
    for (&eci, &seen) in &saw_oai {
        if !seen {
            mapping.unmapped_ecis.push(eci);
            continue;
        }
        let winner = evidence
            .range((eci, 0)..=(eci, u16::MAX))
            .map(|(&(_, pci), &e)| (pci, e))
            // max_by prefers later elements on equal keys, so order the key
            // to favor: more votes, then earlier first sighting, then the
            // smaller pci (range iterates pci ascending).
            .max_by(|a, b| {
                (a.1.count, std::cmp::Reverse(a.1.first_seen_ns))
                    .cmp(&(b.1.count, std::cmp::Reverse(b.1.first_seen_ns)))
                    .then(std::cmp::Ordering::Greater)
            })
            .expect("seen implies at least one pair");
        mapping.entries.insert(
            eci,
            MappedCell {
                pci: winner.0,
                count: winner.1.count,
            },
        );
    }
    Ok(mapping)
}

/// Drop sniffer samples whose PCI contradicts the mapped PCI of the
/// concurrently reported ECI. Samples outside any modem window, or under
/// an unmapped ECI, are kept: there is no evidence against them.
///
/// Returns the surviving samples (order preserved) and the removal count.
pub fn remove_false_positives(
    oai: &[KpiSample],
    mapping: &CellMapping,
    modem: &[KpiSample],
) -> Result<(Vec<KpiSample>, usize)> {
    check_sorted(modem, |s| s.time_ns, "modem")?;
    check_sorted(oai, |s| s.time_ns, "oai")?;

    let mut kept = Vec::with_capacity(oai.len());
    let mut removed = 0usize;
    let mut modem_idx = 0usize;
    for sample in oai {
        // Advance to the last modem sample at or before this sniffer sample.
        while modem_idx + 1 < modem.len() && modem[modem_idx + 1].time_ns <= sample.time_ns {
            modem_idx += 1;
        }
        let current_eci = modem
            .get(modem_idx)
            .filter(|m| m.time_ns <= sample.time_ns)
            .and_then(|m| m.eci);
        let contradicted = match current_eci.and_then(|eci| mapping.pci_for(eci)) {
            Some(expected_pci) => sample.pci != Some(expected_pci),
            None => false,
        };
        if contradicted {
            removed += 1;
        } else {
            kept.push(sample.clone());
        }
    }
    Ok((kept, removed))
}
