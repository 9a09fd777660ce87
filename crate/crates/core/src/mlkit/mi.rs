//! Discretization and plug-in mutual-information estimation.

use std::collections::BTreeMap;

use super::{MlError, Result};

/// Cap on joint-histogram size; beyond this the estimate would be
/// meaningless at realistic sample counts anyway.
pub const MAX_JOINT_CELLS: u128 = 1_000_000;

/// Equal-frequency bin edges fitted on one column.
#[derive(Debug, Clone, PartialEq)]
pub struct Binning {
    /// Ascending upper-exclusive cut points; values ≤ edge fall below it.
    pub edges: Vec<f64>,
    /// True when the fitted column was constant (single bin, MI 0).
    pub constant: bool,
}

/// Discretize a column into equal-frequency bins. Ties go to the lower
/// bin; the returned edges reproduce the coding on held-out data.
pub fn bin_feature(column: &[f64], bins: usize) -> Result<(Vec<u32>, Binning)> {
    if column.is_empty() {
        return Err(MlError::EmptyInput("cannot bin an empty column"));
    }
    if bins < 2 {
        return Err(MlError::BadParam("bins must be at least 2".into()));
    }
    let mut sorted = column.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite feature value"));
    let n = sorted.len();

    let mut edges = Vec::with_capacity(bins - 1);
    for k in 1..bins {
        // 1-based rank ceil(n·k/bins), the quantile boundary element.
        let rank = (n * k).div_ceil(bins);
        let edge = sorted[rank - 1];
        if edges.last() != Some(&edge) {
            edges.push(edge);
        }
    }
    // A fully tied column collapses every edge into the maximum; treat the
    // column as constant-coded either way.
    edges.retain(|&e| e < sorted[n - 1]);
    let binning = Binning {
        constant: edges.is_empty(),
        edges,
    };
    let codes = column.iter().map(|&v| apply_bins(&binning, v)).collect();
    Ok((codes, binning))
}

/// Code a value with previously fitted edges. A value equal to an edge
/// lands in the bin below it.
pub fn apply_bins(binning: &Binning, value: f64) -> u32 {
    binning.edges.partition_point(|&e| e < value) as u32
}

/// Plug-in mutual information I(X; Y) in bits between the joint of one or
/// more discretized columns and the labels.
pub fn mutual_information(columns: &[&[u32]], y: &[usize]) -> Result<f64> {
    if columns.is_empty() {
        return Err(MlError::EmptyInput("no feature columns"));
    }
    if y.is_empty() {
        return Err(MlError::EmptyInput("no labels"));
    }
    for col in columns {
        if col.len() != y.len() {
            return Err(MlError::ShapeMismatch {
                expected: y.len(),
                got: col.len(),
            });
        }
    }
    let radices: Vec<u64> = columns
        .iter()
        .map(|col| u64::from(*col.iter().max().expect("non-empty")) + 1)
        .collect();
    let y_radix = y.iter().max().expect("non-empty") + 1;
    let mut cells: u128 = y_radix as u128;
    for &r in &radices {
        cells = cells.saturating_mul(u128::from(r));
        if cells > MAX_JOINT_CELLS {
            return Err(MlError::HistogramTooLarge {
                cells,
                limit: MAX_JOINT_CELLS,
            });
        }
    }

    let n = y.len();
    let mut joint: BTreeMap<(u64, usize), u64> = BTreeMap::new();
    let mut px: BTreeMap<u64, u64> = BTreeMap::new();
    let mut py: BTreeMap<usize, u64> = BTreeMap::new();
    for i in 0..n {
        let mut key: u64 = 0;
        for (col, &radix) in columns.iter().zip(&radices) {
            key = key * radix + u64::from(col[i]);
        }
        *joint.entry((key, y[i])).or_default() += 1;
        *px.entry(key).or_default() += 1;
        *py.entry(y[i]).or_default() += 1;
    }

    let n_f = n as f64;
    let mut mi = 0.0;
    for (&(x_key, y_key), &n_xy) in &joint {
        let n_x = px[&x_key] as f64;
        let n_y = py[&y_key] as f64;
        let n_xy = n_xy as f64;
        mi += (n_xy / n_f) * ((n_xy * n_f) / (n_x * n_y)).log2();
    }
    // The plug-in estimate is non-negative; clear float dust from the sum.
    Ok(mi.max(0.0))
}

/// Plug-in Shannon entropy in bits of a discrete sequence.
pub fn entropy_bits<T: Copy + Ord>(values: &[T]) -> f64 {
    let mut counts: BTreeMap<T, u64> = BTreeMap::new();
    for &v in values {
        *counts.entry(v).or_default() += 1;
    }
    let n = values.len() as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}
