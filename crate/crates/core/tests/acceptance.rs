//! Acceptance gate for the whole pipeline: channel arithmetic, score
//! identities, live probe/relay measurement, lossless capture, trace
//! fusion, information estimation, feature selection, balancing, the
//! classifier, the end-to-end prediction flow, and compliance analytics.
//!
//! Each test checks one gate criterion at a fixed tolerance and runtime
//! budget and prints a single `PASS ...` line with its measured values
//! (visible with `--nocapture`; the values ride in panic messages on
//! failure). Tests are independent and deterministic under their seeds.

use std::collections::HashMap;
use std::io::Write;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use cvqx_core::analyze::compliance;
use cvqx_core::ingest::{
    build_cell_mapping, earfcn_to_fc, fuse, remove_false_positives, CellMapping, FuseConfig,
    FusedRecord, KpiSample,
};
use cvqx_core::mlkit::{
    balance, batch_gradient, batch_loss, build_dataset, cross_validate, f1_score,
    majority_baseline, md_select, mutual_information, train, ClassScheme, Dataset, ModelGradient,
    TrainParams, TrainedModel, FEATURE_NAMES,
};
use cvqx_core::probe::{run_probe, DelayRecord, ProbeConfig, ProbeRun};
use cvqx_core::recorder::{
    read_capture, run_capture, BlockSource, CaptureConfig, SyntheticSource, BLOCKS_PER_BUFFER,
};
use cvqx_core::relay::{self, RelayConfig, RelayStats};
use cvqx_core::simulate::{generate, EnbProfile, ScenarioConfig, SpeedProfile, TraceBundle};

// ---------------------------------------------------------------------------
// 1. Channel frequency arithmetic: the full drive-test inventory, exact.
// ---------------------------------------------------------------------------

#[test]
fn a01_channel_table_maps_all_inventory_rows_exactly() {
    let started = Instant::now();
    let inventory: &[(u8, u32, f64)] = &[
        (8, 3749, 954.9),
        (3, 1300, 1815.0),
        (3, 1444, 1829.4),
        (20, 6300, 806.0),
        (3, 1801, 1865.1),
        (1, 101, 2120.1),
        (7, 2850, 2630.0),
        (3, 1600, 1845.0),
        (1, 252, 2135.2),
        (7, 3350, 2680.0),
    ];
    for &(band, earfcn, expected_mhz) in inventory {
        let fc = earfcn_to_fc(band, earfcn).unwrap();
        assert_eq!(
            fc, expected_mhz,
            "band {band} earfcn {earfcn}: got {fc}, want {expected_mhz}"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!(
        "PASS channel table: {}/{} rows exact in {elapsed:?}",
        inventory.len(),
        inventory.len()
    );
}

// ---------------------------------------------------------------------------
// 2. Classification score identities on reference values.
// ---------------------------------------------------------------------------

#[test]
fn a02_score_identities_hold_on_reference_values() {
    let started = Instant::now();

    // F1 is the harmonic mean of precision and recall.
    let f1 = f1_score(0.8510, 0.9203);
    assert!((f1 - 0.8843).abs() <= 1e-4, "f1 = {f1}");

    // Accuracy decomposes as the support-weighted sum of per-class recall.
    let weighted = 0.7773_f64 * 0.9203 + 0.2227 * 0.4372;
    assert!((weighted - 0.8127).abs() <= 1e-4, "weighted recall = {weighted}");

    // Balanced accuracy is the plain mean of per-class recalls.
    let balanced_accuracy = (0.6954_f64 + 0.7817) / 2.0;
    assert!(
        (balanced_accuracy - 0.7385).abs() <= 5e-4,
        "balanced accuracy = {balanced_accuracy}"
    );

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!(
        "PASS score identities: f1 {f1:.4}, weighted recall {weighted:.4}, \
         balanced accuracy {balanced_accuracy:.5} in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// 3. Probe against a loopback relay with known injected delay and loss.
// ---------------------------------------------------------------------------

fn probe_against_relay(injected_delay_ms: f64, injected_loss: f64, seed: u64) -> (ProbeRun, RelayStats) {
    let mut relay_cfg = RelayConfig::echo("127.0.0.1:0".parse().unwrap());
    relay_cfg.injected_delay_ms = injected_delay_ms;
    relay_cfg.injected_loss_rate = injected_loss;
    relay_cfg.seed = seed;
    let handle = relay::serve(&relay_cfg).unwrap();
    let probe_cfg = ProbeConfig::new(handle.local_addr(), 500);
    let run = run_probe(&probe_cfg).unwrap();
    let stats = handle.shutdown();
    (run, stats)
}

#[test]
fn a03_probe_recovers_injected_delay_and_loss() {
    let started = Instant::now();

    let mut means = Vec::new();
    for (i, &delay_ms) in [10.0, 25.0, 60.0].iter().enumerate() {
        let (run, _) = probe_against_relay(delay_ms, 0.0, 40 + i as u64);
        assert_eq!(run.meta.lost, 0, "injected delay {delay_ms} ms: lost packets");
        let mean = run.mean_delay_ms().unwrap();
        assert!(
            (mean - delay_ms).abs() <= 5.0,
            "injected {delay_ms} ms, measured mean {mean:.3} ms"
        );
        means.push(mean);
    }

    let (run, stats) = probe_against_relay(0.0, 0.2, 99);
    let observed = run.meta.lost as f64 / run.meta.sent as f64;
    // Two-sided 99% normal interval for a binomial fraction at n = 500.
    let half_width = 2.5758293035489004 * (0.2_f64 * 0.8 / 500.0).sqrt();
    assert!(
        (observed - 0.2).abs() <= half_width,
        "observed loss {observed:.4} outside 0.2 ± {half_width:.4}"
    );
    // Every loss must be the relay's doing: the two counters agree.
    assert_eq!(run.meta.lost, stats.dropped_injected);

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    println!(
        "PASS probe oracle: means {:.2}/{:.2}/{:.2} ms for 10/25/60 ms, \
         loss {observed:.4} in 0.2 ± {half_width:.4}, {elapsed:.1?}",
        means[0], means[1], means[2]
    );
}

// ---------------------------------------------------------------------------
// 4. Capture losslessness at nominal rate; truthful accounting under strain.
// ---------------------------------------------------------------------------

/// Sink that sleeps on every write, starving the writer thread.
struct ThrottledSink<'a> {
    out: &'a mut Vec<u8>,
    per_write: Duration,
}

impl Write for ThrottledSink<'_> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        std::thread::sleep(self.per_write);
        self.out.extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[test]
fn a04_capture_is_lossless_at_nominal_rate_and_truthful_under_strain() {
    let started = Instant::now();
    let (block_bytes, seed) = (4096usize, 99u64);

    // 60 s of signal at the nominal block cadence, two serializer workers.
    let mut source = SyntheticSource::paced_for(60, block_bytes, seed);
    let mut file = Vec::new();
    let report = run_capture(&mut source, &mut file, &CaptureConfig::default()).unwrap();
    assert_eq!(report.blocks_produced, 6000);
    assert_eq!(report.blocks_lost, 0, "lost blocks at nominal rate");
    assert_eq!(report.blocks_captured, 6000);

    // Parse back: checksums verified frame by frame, order strict.
    let parsed = read_capture(&file[..]).unwrap();
    assert!(parsed.clean_end, "missing trailer");
    assert_eq!(parsed.blocks.len(), 6000);
    let seqs: Vec<u64> = parsed.blocks.iter().map(|b| b.sequence_index).collect();
    assert_eq!(seqs, (0..6000).collect::<Vec<u64>>(), "sequence not gapless");
    // Payload oracle: a second identically seeded source reproduces the
    // session byte for byte.
    let mut oracle = SyntheticSource::new(6000, block_bytes, seed);
    for block in &parsed.blocks {
        let expected = oracle.next_block().unwrap();
        assert_eq!(block.payload, expected.payload, "payload at {}", block.sequence_index);
        assert_eq!(block.start_time_ns, expected.start_time_ns);
    }

    // A throttled sink must lose whole buffers and say so.
    let mut strained_source = SyntheticSource::new(500, 2048, 3);
    let mut strained_file = Vec::new();
    let sink = ThrottledSink {
        out: &mut strained_file,
        per_write: Duration::from_millis(20),
    };
    let strained = run_capture(&mut strained_source, sink, &CaptureConfig::default()).unwrap();
    assert!(strained.blocks_lost > 0, "throttled sink lost nothing");
    assert_eq!(strained.blocks_lost % BLOCKS_PER_BUFFER as u64, 0);
    assert_eq!(
        strained.blocks_captured + strained.blocks_lost,
        strained.blocks_produced,
        "capture accounting leaks blocks"
    );
    let strained_parsed = read_capture(&strained_file[..]).unwrap();
    assert_eq!(strained_parsed.blocks.len() as u64, strained.blocks_captured);

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    println!(
        "PASS capture: 6000/6000 blocks lossless over 60 s; under strain \
         {} captured + {} lost = {} produced, {elapsed:.1?}",
        strained.blocks_captured, strained.blocks_lost, strained.blocks_produced
    );
}

// ---------------------------------------------------------------------------
// 5. Fusion: zero staleness on an aligned trace; exact false-positive removal.
// ---------------------------------------------------------------------------

fn enb(eci: u32, pci: u16, base_delay_ms: f64, jitter_ms: f64, dwell_s: u64) -> EnbProfile {
    EnbProfile {
        eci,
        pci,
        band: 3,
        earfcn: 1300,
        bandwidth_mhz: 20.0,
        base_delay_ms,
        delay_jitter_ms: jitter_ms,
        rsrp_center_dbm: -85.0,
        rsrp_sigma_db: 4.0,
        burst_rate_per_min: 0.0,
        burst_magnitude_ms: 0.0,
        dwell_s,
    }
}

fn scenario(seed: u64, packet_interval_ms: u64, enbs: Vec<EnbProfile>) -> ScenarioConfig {
    ScenarioConfig {
        duration_s: enbs.iter().map(|e| e.dwell_s).sum(),
        packet_interval_ms,
        seed,
        session_id: 1,
        enb_sequence: enbs,
        coverage_gaps: Vec::new(),
        speed: SpeedProfile::default(),
        burst_duration_ms: 500.0,
    }
}

/// Generate a scenario, estimate the cell mapping from its own streams,
/// and fuse everything.
fn fused_bundle(cfg: &ScenarioConfig) -> (TraceBundle, Vec<FusedRecord>, CellMapping) {
    let bundle = generate(cfg).unwrap();
    let mapping = build_cell_mapping(&bundle.modem, &bundle.oai).unwrap();
    let fuse_cfg = FuseConfig {
        channels: bundle.channels.clone(),
        mapping: Some(mapping.clone()),
        ..FuseConfig::default()
    };
    let fused = fuse(&bundle.delays, &bundle.modem, &bundle.oai, &bundle.gnss, &fuse_cfg).unwrap();
    (bundle, fused, mapping)
}

#[test]
fn a05_fusion_staleness_and_false_positive_removal_are_exact() {
    let started = Instant::now();

    // Packets every 2000 ms land on the sample grids of all three sources
    // (10 ms, 50 ms and 2000 ms), so every join must be exact.
    let aligned = scenario(5, 2000, vec![enb(11, 101, 20.0, 2.0, 30), enb(22, 202, 30.0, 2.0, 30)]);
    let (_, fused, _) = fused_bundle(&aligned);
    assert_eq!(fused.len(), 30);
    for r in &fused {
        assert_eq!(r.modem_staleness_ns, Some(0), "sequence {}", r.sequence);
        assert_eq!(r.oai_staleness_ns, Some(0), "sequence {}", r.sequence);
        assert_eq!(r.gnss_staleness_ns, Some(0), "sequence {}", r.sequence);
        assert!(r.eci.is_some() && r.pci.is_some() && !r.lost);
        assert!(r.fc_dl_mhz.is_some() && r.bandwidth_mhz.is_some());
    }

    // Corrupt the PCI of every 20th sniffer sample (exactly 5%). The
    // mapping is estimated from the corrupted stream itself; majority
    // voting must still recover it, and the cleanup must remove exactly
    // the corrupted samples.
    let drive = scenario(6, 40, vec![enb(11, 101, 20.0, 2.0, 20), enb(22, 202, 30.0, 2.0, 20)]);
    let bundle = generate(&drive).unwrap();
    let mut corrupted = bundle.oai.clone();
    let mut corrupted_count = 0usize;
    for (i, sample) in corrupted.iter_mut().enumerate() {
        if i % 20 == 0 {
            sample.pci = Some(499);
            corrupted_count += 1;
        }
    }
    let mapping = build_cell_mapping(&bundle.modem, &corrupted).unwrap();
    assert_eq!(mapping.pci_for(11), Some(101));
    assert_eq!(mapping.pci_for(22), Some(202));
    let (kept, removed) = remove_false_positives(&corrupted, &mapping, &bundle.modem).unwrap();
    assert_eq!(removed, corrupted_count, "removal count is not exact");
    let expected_kept: Vec<KpiSample> = corrupted
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 20 != 0)
        .map(|(_, s)| s.clone())
        .collect();
    assert_eq!(kept, expected_kept, "cleanup touched uncorrupted samples");

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    println!(
        "PASS fusion: 30/30 aligned records at zero staleness; \
         {removed}/{corrupted_count} corrupted samples removed exactly, {elapsed:.1?}"
    );
}

// ---------------------------------------------------------------------------
// 6. Mutual information against an independent brute-force computation.
// ---------------------------------------------------------------------------

/// Straightforward joint-histogram estimate over hash maps, written
/// independently of the production estimator.
fn brute_force_mi(columns: &[&[u32]], y: &[usize]) -> f64 {
    let n = y.len() as f64;
    let mut joint: HashMap<(Vec<u32>, usize), usize> = HashMap::new();
    let mut x_marginal: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut y_marginal: HashMap<usize, usize> = HashMap::new();
    for i in 0..y.len() {
        let key: Vec<u32> = columns.iter().map(|c| c[i]).collect();
        *joint.entry((key.clone(), y[i])).or_default() += 1;
        *x_marginal.entry(key).or_default() += 1;
        *y_marginal.entry(y[i]).or_default() += 1;
    }
    joint
        .iter()
        .map(|((key, label), &count)| {
            let pxy = count as f64 / n;
            let px = x_marginal[key] as f64 / n;
            let py = y_marginal[label] as f64 / n;
            pxy * (pxy / (px * py)).log2()
        })
        .sum()
}

#[test]
fn a06_mi_estimator_matches_brute_force_and_exact_cases() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut max_diff = 0.0f64;

    for _ in 0..50 {
        let n = rng.gen_range(40..=300);
        let n_cols = rng.gen_range(1..=3);
        let n_classes = rng.gen_range(2..=4);
        let columns: Vec<Vec<u32>> = (0..n_cols)
            .map(|_| {
                let radix = rng.gen_range(2..=5);
                (0..n).map(|_| rng.gen_range(0..radix)).collect()
            })
            .collect();
        // Couple the label to the first column often enough that the
        // comparison covers dependent as well as independent cases.
        let y: Vec<usize> = (0..n)
            .map(|i| {
                if rng.gen_bool(0.6) {
                    columns[0][i] as usize % n_classes
                } else {
                    rng.gen_range(0..n_classes)
                }
            })
            .collect();
        let views: Vec<&[u32]> = columns.iter().map(|c| c.as_slice()).collect();
        let estimated = mutual_information(&views, &y).unwrap();
        let reference = brute_force_mi(&views, &y);
        let diff = (estimated - reference).abs();
        assert!(diff <= 1e-12, "estimator {estimated} vs brute force {reference}");
        max_diff = max_diff.max(diff);
    }

    // Identity: a column equal to a balanced binary label carries its full
    // entropy, exactly one bit.
    let y: Vec<usize> = (0..128).map(|i| i % 2).collect();
    let x: Vec<u32> = y.iter().map(|&v| v as u32).collect();
    let identity = mutual_information(&[&x], &y).unwrap();
    assert_eq!(identity, 1.0, "identity case not exact");

    // Independence: a perfect product distribution carries exactly zero.
    let x: Vec<u32> = (0..128).map(|i| (i / 2) % 2).collect();
    let y: Vec<usize> = (0..128).map(|i| i % 2).collect();
    let independence = mutual_information(&[&x], &y).unwrap();
    assert_eq!(independence, 0.0, "independence case not exact");

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    println!(
        "PASS mutual information: 50/50 datasets within 1e-12 of brute force \
         (max diff {max_diff:.2e}); identity and independence exact, {elapsed:.1?}"
    );
}

// ---------------------------------------------------------------------------
// 7. Greedy selection ranks planted features above noise; duplicates never
//    enter the set.
// ---------------------------------------------------------------------------

#[test]
fn a07_selection_prefers_planted_features_and_rejects_duplicates() {
    let started = Instant::now();
    let runs = 20;
    let mut planted_first = 0usize;

    for run in 0..runs {
        // Two cells whose delay regimes overlap around the 50 ms class
        // boundary: the per-cell expected delay and the (delay-coupled)
        // SINR both carry real information about the class.
        let cfg = scenario(
            4200 + run,
            40,
            vec![enb(11, 101, 45.0, 12.0, 120), enb(22, 202, 55.0, 12.0, 120)],
        );
        let (_, fused, _) = fused_bundle(&cfg);
        let (base, stats) = build_dataset(
            &fused,
            ClassScheme::Binary50,
            &["expected_e2e_delay_ms", "sinr_db"],
            20,
        )
        .unwrap();
        assert!(stats.constant_features.is_empty());

        // Extend with two pure-noise columns and an exact duplicate of
        // the expected-delay column under a name that sorts last.
        let n = base.n_rows();
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + run);
        let noise: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let combined = Array2::from_shape_fn((n, 5), |(i, j)| match j {
            0 => base.features[[i, 0]],
            1 => base.features[[i, 1]],
            4 => base.features[[i, 0]],
            _ => noise[j - 2][i],
        });
        let names = vec![
            "expected_e2e_delay_ms".to_string(),
            "sinr_db".to_string(),
            "noise_a".to_string(),
            "noise_b".to_string(),
            "zz_echo_of_expected".to_string(),
        ];
        let ds = Dataset::from_parts(combined, base.labels.clone(), names, 2).unwrap();

        let steps = md_select(&ds, 5, 10).unwrap();
        let order: Vec<&str> = steps.iter().map(|s| s.feature.as_str()).collect();
        assert!(
            !order.contains(&"zz_echo_of_expected"),
            "run {run}: duplicate selected in {order:?}"
        );
        let mut first_two = order.iter().take(2).copied().collect::<Vec<_>>();
        first_two.sort_unstable();
        if first_two == ["expected_e2e_delay_ms", "sinr_db"] {
            planted_first += 1;
        }
    }

    assert!(
        planted_first * 100 >= runs as usize * 95,
        "planted features led in only {planted_first}/{runs} runs"
    );
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    println!(
        "PASS feature selection: planted features first in {planted_first}/{runs} runs; \
         duplicate never selected, {elapsed:.1?}"
    );
}

// ---------------------------------------------------------------------------
// 8. Class balancing arithmetic.
// ---------------------------------------------------------------------------

fn labeled_dataset(counts: &[usize], seed: u64) -> Dataset {
    let total: usize = counts.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = Array2::from_shape_fn((total, 1), |_| rng.sample::<f64, _>(StandardNormal));
    let mut labels = Vec::with_capacity(total);
    for (class, &count) in counts.iter().enumerate() {
        labels.extend(std::iter::repeat_n(class, count));
    }
    Dataset::from_parts(features, labels, vec!["x".into()], counts.len()).unwrap()
}

#[test]
fn a08_balancing_arithmetic_is_exact() {
    let started = Instant::now();

    let binary = balance(&labeled_dataset(&[80, 20], 1), 7).unwrap();
    assert_eq!(binary.class_counts(), vec![20, 20]);

    let multi = balance(&labeled_dataset(&[700, 200, 30], 2), 7).unwrap();
    let counts = multi.class_counts();
    assert_eq!(counts, vec![210, 60, 30]);
    let rare_support = counts[2] as f64 / multi.n_rows() as f64;
    assert_eq!(rare_support, 0.10, "rare-class support not exactly one tenth");

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!(
        "PASS balancing: (80,20)→(20,20); (700,200,30)→(210,60,30) with rare \
         support exactly 0.10, {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// 9. Classifier correctness: gradients, separable data, shuffled labels.
// ---------------------------------------------------------------------------

fn param_mut(model: &mut TrainedModel, flat: usize) -> &mut f64 {
    let (d, h, c) = (model.input_dim(), model.hidden_dim(), model.n_classes());
    if flat < d * h {
        &mut model.w1[[flat / h, flat % h]]
    } else if flat < d * h + h {
        &mut model.b1[flat - d * h]
    } else if flat < d * h + h + h * c {
        let i = flat - d * h - h;
        &mut model.w2[[i / c, i % c]]
    } else {
        &mut model.b2[flat - d * h - h - h * c]
    }
}

fn gradient_at(gradient: &ModelGradient, dims: (usize, usize, usize), flat: usize) -> f64 {
    let (d, h, c) = dims;
    if flat < d * h {
        gradient.w1[[flat / h, flat % h]]
    } else if flat < d * h + h {
        gradient.b1[flat - d * h]
    } else if flat < d * h + h + h * c {
        let i = flat - d * h - h;
        gradient.w2[[i / c, i % c]]
    } else {
        gradient.b2[flat - d * h - h - h * c]
    }
}

fn two_clouds(n_per_class: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * n_per_class;
    let mut features = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let center = if class == 0 { -1.0 } else { 1.0 };
        features[[i, 0]] = center + rng.gen_range(-0.4..0.4);
        features[[i, 1]] = rng.gen_range(-1.0..1.0);
        labels.push(class);
    }
    Dataset::from_parts(features, labels, vec!["x0".into(), "x1".into()], 2).unwrap()
}

#[test]
fn a09_classifier_gradients_capacity_and_null_behavior() {
    let started = Instant::now();

    // Analytic gradient vs central finite differences on 10 random
    // coordinates spread over all four parameter tensors.
    let (d, h, c) = (5usize, 7usize, 3usize);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut model = TrainedModel::new_zero(
        (0..d).map(|i| format!("x{i}")).collect(),
        vec![(0.0, 1.0); d],
        h,
        c,
    );
    let total = d * h + h + h * c + c;
    for flat in 0..total {
        *param_mut(&mut model, flat) = rng.sample::<f64, _>(StandardNormal) * 0.5;
    }
    let rows = Array2::from_shape_fn((16, d), |_| rng.sample::<f64, _>(StandardNormal));
    let y: Vec<usize> = (0..16).map(|_| rng.gen_range(0..c)).collect();
    let analytic = batch_gradient(&model, rows.view(), &y).unwrap();

    let mut coords: Vec<usize> = Vec::new();
    while coords.len() < 10 {
        let flat = rng.gen_range(0..total);
        if !coords.contains(&flat) {
            coords.push(flat);
        }
    }
    let step = 1e-5;
    let mut max_rel = 0.0f64;
    for &flat in &coords {
        let mut plus = model.clone();
        *param_mut(&mut plus, flat) += step;
        let mut minus = model.clone();
        *param_mut(&mut minus, flat) -= step;
        let numeric = (batch_loss(&plus, rows.view(), &y).unwrap()
            - batch_loss(&minus, rows.view(), &y).unwrap())
            / (2.0 * step);
        let exact = gradient_at(&analytic, (d, h, c), flat);
        let rel = (exact - numeric).abs() / exact.abs().max(numeric.abs()).max(1e-6);
        assert!(rel <= 1e-4, "coordinate {flat}: analytic {exact}, numeric {numeric}");
        max_rel = max_rel.max(rel);
    }

    // Capacity: linearly separable clouds must be learned almost perfectly.
    let separable = two_clouds(200, 12);
    let params = TrainParams {
        hidden: 16,
        learning_rate: 0.05,
        momentum: 0.9,
        batch_size: 64,
        epochs: 80,
        seed: 5,
    };
    let outcome = train(&separable, &params).unwrap();
    let train_accuracy = outcome.model.evaluate(&separable).unwrap().accuracy;
    assert!(train_accuracy >= 0.99, "separable accuracy {train_accuracy}");

    // Null behavior: with shuffled labels the cross-validated accuracy
    // cannot beat the majority prior by more than noise.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let features = Array2::from_shape_fn((1000, 4), |_| rng.sample::<f64, _>(StandardNormal));
    let mut labels: Vec<usize> = (0..1000).map(|i| i % 2).collect();
    labels.shuffle(&mut rng);
    let null_ds = Dataset::from_parts(
        features,
        labels,
        (0..4).map(|i| format!("x{i}")).collect(),
        2,
    )
    .unwrap();
    let null_params = TrainParams {
        hidden: 16,
        learning_rate: 0.01,
        momentum: 0.9,
        batch_size: 256,
        epochs: 30,
        seed: 17,
    };
    let cv = cross_validate(&null_ds, 5, &null_params).unwrap();
    let prior = 0.5;
    assert!(
        (cv.report.accuracy - prior).abs() <= 0.05,
        "null accuracy {} strays from prior {prior}",
        cv.report.accuracy
    );

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    println!(
        "PASS classifier: max gradient error {max_rel:.2e}; separable accuracy \
         {train_accuracy:.4}; shuffled-label CV {:.4} vs prior {prior}, {elapsed:.1?}",
        cv.report.accuracy
    );
}

// ---------------------------------------------------------------------------
// 10. End-to-end prediction on two delay regimes straddling 50 ms.
// ---------------------------------------------------------------------------

#[test]
fn a10_end_to_end_pipeline_predicts_delay_class() {
    let started = Instant::now();

    let cfg = scenario(
        2026,
        40,
        vec![enb(11, 101, 30.0, 6.0, 120), enb(22, 202, 80.0, 6.0, 120)],
    );
    let (_, fused, _) = fused_bundle(&cfg);
    let (ds, stats) = build_dataset(&fused, ClassScheme::Binary50, &FEATURE_NAMES, 20).unwrap();
    assert!(stats.constant_features.is_empty(), "dropped {:?}", stats.constant_features);

    let steps = md_select(&ds, ds.n_features(), 10).unwrap();
    assert_eq!(
        steps[0].feature, "expected_e2e_delay_ms",
        "selection order {:?}",
        steps.iter().map(|s| s.feature.as_str()).collect::<Vec<_>>()
    );
    let names: Vec<&str> = steps.iter().map(|s| s.feature.as_str()).collect();
    let selected = ds.select_features(&names).unwrap();

    let balanced = balance(&selected, 31).unwrap();
    let params = TrainParams {
        hidden: 32,
        learning_rate: 0.02,
        momentum: 0.9,
        batch_size: 256,
        epochs: 40,
        seed: 31,
    };
    let cv = cross_validate(&balanced, 5, &params).unwrap();
    let baseline = majority_baseline(&balanced.labels, balanced.n_classes).unwrap();
    assert!(
        cv.report.accuracy >= 0.90,
        "pooled accuracy {}",
        cv.report.accuracy
    );
    assert!(
        cv.report.accuracy > baseline.accuracy,
        "accuracy {} does not beat baseline {}",
        cv.report.accuracy,
        baseline.accuracy
    );

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    println!(
        "PASS end to end: expected-delay feature selected first of {}; pooled \
         accuracy {:.4} vs baseline {:.4}, {elapsed:.1?}",
        names.len(),
        cv.report.accuracy,
        baseline.accuracy
    );
}

// ---------------------------------------------------------------------------
// 11. Compliance analytics against brute-force counting.
// ---------------------------------------------------------------------------

#[test]
fn a11_compliance_matches_brute_force_on_random_sets() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let sets = 10_000;

    for _ in 0..sets {
        let n = rng.gen_range(1..=60u64);
        let records: Vec<DelayRecord> = (0..n)
            .map(|i| {
                // Keep at least the first packet received so fractions exist.
                if i > 0 && rng.gen_bool(0.1) {
                    DelayRecord::lost(1, i, 0)
                } else {
                    DelayRecord {
                        session_id: 1,
                        sequence: i,
                        tx_time_ns: 0,
                        rx_time_ns: None,
                        e2e_delay_ms: Some(rng.gen_range(0.0..150.0)),
                        lost: false,
                    }
                }
            })
            .collect();
        let thresholds: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..150.0)).collect();
        let report = compliance(&records, &thresholds).unwrap();

        for t in &report.thresholds {
            let counted = records
                .iter()
                .filter(|r| !r.lost && r.e2e_delay_ms.unwrap() <= t.threshold_ms)
                .count();
            assert_eq!(t.compliant, counted, "count at {} ms", t.threshold_ms);
            assert_eq!(
                t.fraction,
                counted as f64 / report.packets as f64,
                "fraction at {} ms",
                t.threshold_ms
            );
        }
        for pair in report.thresholds.windows(2) {
            assert!(
                pair[0].fraction <= pair[1].fraction,
                "fractions not monotone: {} then {}",
                pair[0].fraction,
                pair[1].fraction
            );
        }
    }

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    println!("PASS compliance: {sets}/{sets} random sets match brute force; monotone, {elapsed:.1?}");
}
