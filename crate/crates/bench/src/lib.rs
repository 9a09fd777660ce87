//! Shared fixtures for the pipeline benchmarks: a deterministic two-cell
//! drive trace and a synthetic Gaussian-cloud classification set.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use cvqx_core::ingest::{build_cell_mapping, fuse, FuseConfig, FusedRecord};
use cvqx_core::mlkit::Dataset;
use cvqx_core::simulate::{generate, EnbProfile, ScenarioConfig, SpeedProfile, TraceBundle};

/// Two-cell, two-minute drive: enough samples that fusion, selection and
/// training do real work, small enough to iterate in a benchmark.
pub fn drive_trace(seed: u64) -> TraceBundle {
    let enb = |eci: u32, pci: u16, base_delay_ms: f64, dwell_s: u64| EnbProfile {
        eci,
        pci,
        band: 3,
        earfcn: 1300,
        bandwidth_mhz: 20.0,
        base_delay_ms,
        delay_jitter_ms: 8.0,
        rsrp_center_dbm: -85.0,
        rsrp_sigma_db: 4.0,
        burst_rate_per_min: 0.0,
        burst_magnitude_ms: 0.0,
        dwell_s,
    };
    let cfg = ScenarioConfig {
        duration_s: 120,
        packet_interval_ms: 40,
        seed,
        session_id: 1,
        enb_sequence: vec![enb(11, 101, 35.0, 60), enb(22, 202, 70.0, 60)],
        coverage_gaps: Vec::new(),
        speed: SpeedProfile::default(),
        burst_duration_ms: 500.0,
    };
    generate(&cfg).expect("benchmark scenario generates")
}

/// Fuse a trace bundle exactly as the pipeline would.
pub fn fuse_trace(bundle: &TraceBundle) -> Vec<FusedRecord> {
    let mapping =
        build_cell_mapping(&bundle.modem, &bundle.oai).expect("benchmark trace maps cells");
    let cfg = FuseConfig {
        channels: bundle.channels.clone(),
        mapping: Some(mapping),
        ..FuseConfig::default()
    };
    fuse(&bundle.delays, &bundle.modem, &bundle.oai, &bundle.gnss, &cfg)
        .expect("benchmark trace fuses")
}

/// Two well-separated Gaussian clouds, `n_per_class` rows each.
pub fn gaussian_clouds(n_per_class: usize, n_features: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * n_per_class;
    let mut features = Array2::zeros((n, n_features));
    let mut labels = Vec::with_capacity(n);
    for row in 0..n {
        let class = row / n_per_class;
        let center = if class == 0 { -2.0 } else { 2.0 };
        for col in 0..n_features {
            let noise: f64 = StandardNormal.sample(&mut rng);
            features[[row, col]] = center + noise;
        }
        labels.push(class);
    }
    let names = (0..n_features).map(|i| format!("f{i}")).collect();
    Dataset::from_parts(features, labels, names, 2).expect("benchmark dataset builds")
}
