//! Feature-matrix construction from fused packet records.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};

use super::{MlError, Result};
use crate::analyze::expected_delay_online;
use crate::ingest::FusedRecord;

/// Canonical feature order for datasets built from fused records.
pub const FEATURE_NAMES: [&str; 8] = [
    "expected_e2e_delay_ms",
    "speed_kmph",
    "sinr_db",
    "rsrp_dbm",
    "rssi_dbm",
    "rsrq_db",
    "noise_power_dbm",
    "rx_power_dbm",
];

/// How an observed delay maps onto a class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassScheme {
    /// {delay ≤ 50 ms, delay > 50 ms}
    Binary50,
    /// {≤ 50 ms, > 50 ms and ≤ 100 ms, > 100 ms}
    Multiclass,
}

impl ClassScheme {
    pub fn n_classes(self) -> usize {
        match self {
            ClassScheme::Binary50 => 2,
            ClassScheme::Multiclass => 3,
        }
    }

    pub fn class_of(self, delay_ms: f64) -> usize {
        match self {
            ClassScheme::Binary50 => usize::from(delay_ms > 50.0),
            ClassScheme::Multiclass => {
                if delay_ms <= 50.0 {
                    0
                } else if delay_ms <= 100.0 {
                    1
                } else {
                    2
                }
            }
        }
    }

    pub fn class_names(self) -> &'static [&'static str] {
        match self {
            ClassScheme::Binary50 => &["<=50ms", ">50ms"],
            ClassScheme::Multiclass => &["<=50ms", "50-100ms", ">100ms"],
        }
    }
}

impl fmt::Display for ClassScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassScheme::Binary50 => "binary50",
            ClassScheme::Multiclass => "multiclass",
        })
    }
}

impl FromStr for ClassScheme {
    type Err = MlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary50" => Ok(ClassScheme::Binary50),
            "multiclass" => Ok(ClassScheme::Multiclass),
            other => Err(MlError::BadParam(format!(
                "unknown class scheme '{other}' (expected binary50 or multiclass)"
            ))),
        }
    }
}

/// A complete feature matrix with labels and per-feature statistics.
///
/// Rows never contain absent values — records with missing features are
/// dropped during construction and counted. The (mean, std) pairs are the
/// statistics of this dataset's own rows, so a training split normalizes
/// with training statistics by construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    /// Per-feature (mean, std) over this dataset's rows; std > 0 always.
    pub norm: Vec<(f64, f64)>,
    pub n_classes: usize,
    /// Scheme the labels were derived from, when they came from delays.
    pub scheme: Option<ClassScheme>,
}

/// What `build_dataset` kept and why it dropped the rest.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetBuildStats {
    pub rows_total: usize,
    pub rows_kept: usize,
    /// Rows missing the delay (lost packets) or any requested feature.
    pub rows_dropped: usize,
    /// Requested features removed because they were constant over the
    /// kept rows.
    pub constant_features: Vec<String>,
}

impl Dataset {
    /// Assemble a dataset from raw parts, computing normalization
    /// statistics. Errors if shapes disagree, the matrix is empty, a
    /// label is out of range, or any column is constant.
    pub fn from_parts(
        features: Array2<f64>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        n_classes: usize,
    ) -> Result<Dataset> {
        if features.nrows() == 0 {
            return Err(MlError::EmptyInput("dataset has no rows"));
        }
        if features.nrows() != labels.len() {
            return Err(MlError::ShapeMismatch {
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        if features.ncols() != feature_names.len() {
            return Err(MlError::ShapeMismatch {
                expected: features.ncols(),
                got: feature_names.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(MlError::BadParam(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        let norm = column_stats(&features, &feature_names)?;
        Ok(Dataset {
            features,
            labels,
            feature_names,
            norm,
            n_classes,
            scheme: None,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn column(&self, index: usize) -> ArrayView1<'_, f64> {
        self.features.column(index)
    }

    pub fn column_by_name(&self, name: &str) -> Option<ArrayView1<'_, f64>> {
        let idx = self.feature_names.iter().position(|n| n == name)?;
        Some(self.features.column(idx))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, as a new dataset with its own statistics.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Array2::zeros((indices.len(), self.n_features()));
        let mut labels = Vec::with_capacity(indices.len());
        for (row, &i) in indices.iter().enumerate() {
            features.row_mut(row).assign(&self.features.row(i));
            labels.push(self.labels[i]);
        }
        let mut sub = Dataset::from_parts(features, labels, self.feature_names.clone(), self.n_classes)?;
        sub.scheme = self.scheme;
        Ok(sub)
    }

    /// Dataset restricted to the named feature columns, in the given order.
    pub fn select_features(&self, names: &[&str]) -> Result<Dataset> {
        let mut indices = Vec::with_capacity(names.len());
        for &name in names {
            let idx = self
                .feature_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| MlError::BadParam(format!("unknown feature '{name}'")))?;
            indices.push(idx);
        }
        let mut features = Array2::zeros((self.n_rows(), indices.len()));
        for (col, &i) in indices.iter().enumerate() {
            features.column_mut(col).assign(&self.features.column(i));
        }
        let mut out = Dataset::from_parts(
            features,
            self.labels.clone(),
            names.iter().map(|s| s.to_string()).collect(),
            self.n_classes,
        )?;
        out.scheme = self.scheme;
        Ok(out)
    }
}

fn column_stats(features: &Array2<f64>, names: &[String]) -> Result<Vec<(f64, f64)>> {
    let n = features.nrows() as f64;
    let mut stats = Vec::with_capacity(features.ncols());
    for (i, col) in features.columns().into_iter().enumerate() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if std == 0.0 {
            return Err(MlError::ConstantFeature(names[i].clone()));
        }
        stats.push((mean, std));
    }
    Ok(stats)
}

fn record_feature(r: &FusedRecord, name: &str, expected: Option<f64>) -> Option<f64> {
    match name {
        "expected_e2e_delay_ms" => expected,
        "speed_kmph" => r.speed_kmph,
        "sinr_db" => r.sinr_db,
        "rsrp_dbm" => r.rsrp_dbm,
        "rssi_dbm" => r.rssi_dbm,
        "rsrq_db" => r.rsrq_db,
        "noise_power_dbm" => r.noise_power_dbm,
        "rx_power_dbm" => r.rx_power_dbm,
        _ => None,
    }
}

/// Build a labeled dataset from fused records.
///
/// A row is kept when the packet has a measured delay (the label source)
/// and every requested feature is present. The expected-delay feature is
/// accumulated online per cell with `warmup_n` prior packets required
/// before it exists. Constant columns are removed and reported.
pub fn build_dataset(
    records: &[FusedRecord],
    scheme: ClassScheme,
    feature_names: &[&str],
    warmup_n: u64,
) -> Result<(Dataset, DatasetBuildStats)> {
    for &name in feature_names {
        if !FEATURE_NAMES.contains(&name) {
            return Err(MlError::BadParam(format!("unknown feature '{name}'")));
        }
    }
    if feature_names.is_empty() {
        return Err(MlError::BadParam("no features requested".into()));
    }
    let expected = if feature_names.contains(&"expected_e2e_delay_ms") {
        expected_delay_online(records, warmup_n)
    } else {
        vec![None; records.len()]
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (r, &exp) in records.iter().zip(&expected) {
        let Some(delay) = r.e2e_delay_ms else { continue };
        let mut row = Vec::with_capacity(feature_names.len());
        let mut complete = true;
        for &name in feature_names {
            match record_feature(r, name, exp) {
                Some(v) => row.push(v),
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if complete {
            rows.push(row);
            labels.push(scheme.class_of(delay));
        }
    }
    if rows.is_empty() {
        return Err(MlError::EmptyInput("no complete rows to build from"));
    }

    // Drop constant columns up front so normalization stays well-defined.
    let mut keep: Vec<usize> = Vec::new();
    let mut constant_features = Vec::new();
    for (i, &name) in feature_names.iter().enumerate() {
        let first = rows[0][i];
        if rows.iter().any(|r| r[i] != first) {
            keep.push(i);
        } else {
            constant_features.push(name.to_string());
        }
    }
    if keep.is_empty() {
        return Err(MlError::EmptyInput("every requested feature is constant"));
    }

    let mut features = Array2::zeros((rows.len(), keep.len()));
    for (ri, row) in rows.iter().enumerate() {
        for (ci, &fi) in keep.iter().enumerate() {
            features[[ri, ci]] = row[fi];
        }
    }
    let kept_names: Vec<String> = keep.iter().map(|&i| feature_names[i].to_string()).collect();
    let mut dataset = Dataset::from_parts(features, labels, kept_names, scheme.n_classes())?;
    dataset.scheme = Some(scheme);
    let stats = DatasetBuildStats {
        rows_total: records.len(),
        rows_kept: dataset.n_rows(),
        rows_dropped: records.len() - dataset.n_rows(),
        constant_features,
    };
    Ok((dataset, stats))
}
