//! E-UTRA downlink EARFCN to carrier-frequency mapping.
//!
//! The standard mapping is fc = F_DL_low + 0.1 · (N − N_offs) with per-band
//! constants. Only the bands observed in the drive-test inventory are
//! supported. The arithmetic runs in integer deci-MHz and divides once at
//! the end, so results are exact to 0.1 MHz with no accumulated rounding.

use super::{IngestError, Result};

struct BandPlan {
    band: u8,
    /// F_DL_low in deci-MHz.
    fdl_low_dmhz: u32,
    /// N_offs-DL.
    n_offs: u32,
    /// Inclusive downlink EARFCN range.
    range: (u32, u32),
}

const BAND_PLANS: &[BandPlan] = &[
    BandPlan { band: 1, fdl_low_dmhz: 21_100, n_offs: 0, range: (0, 599) },
    BandPlan { band: 3, fdl_low_dmhz: 18_050, n_offs: 1200, range: (1200, 1949) },
    BandPlan { band: 7, fdl_low_dmhz: 26_200, n_offs: 2750, range: (2750, 3449) },
    BandPlan { band: 8, fdl_low_dmhz: 9_250, n_offs: 3450, range: (3450, 3799) },
    BandPlan { band: 20, fdl_low_dmhz: 7_910, n_offs: 6150, range: (6150, 6449) },
];

/// Bands this mapping knows about.
pub fn supported_bands() -> Vec<u8> {
    BAND_PLANS.iter().map(|p| p.band).collect()
}

/// Downlink carrier frequency in MHz for a (band, earfcn) pair.
pub fn earfcn_to_fc(band: u8, earfcn: u32) -> Result<f64> {
    let plan = BAND_PLANS
        .iter()
        .find(|p| p.band == band)
        .ok_or(IngestError::UnsupportedBand(band))?;
    let (lo, hi) = plan.range;
    if earfcn < lo || earfcn > hi {
        return Err(IngestError::EarfcnOutOfRange { band, earfcn, lo, hi });
    }
    let fc_dmhz = plan.fdl_low_dmhz + (earfcn - plan.n_offs);
    Ok(fc_dmhz as f64 / 10.0)
}
