//! Greedy maximum-dependency feature selection.

use super::mi::{bin_feature, mutual_information};
use super::{Dataset, MlError, Result};

/// One step of the greedy selection: the chosen feature, the joint MI of
/// everything selected so far, and what this feature added.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStep {
    pub feature: String,
    pub joint_mi_bits: f64,
    pub gain_bits: f64,
}

/// Gains below this are treated as no information.
const GAIN_EPSILON: f64 = 1e-9;

/// Forward selection maximizing the joint mutual information between the
/// selected features and the labels.
///
/// Each round adds the candidate with the largest joint-MI gain, so a
/// redundant feature (zero conditional information) never beats an
/// informative one. Ties break by feature-name order. Selection stops at
/// `max_features` or when the best gain drops to (numerically) nothing.
pub fn md_select(dataset: &Dataset, max_features: usize, bins: usize) -> Result<Vec<SelectionStep>> {
    if max_features == 0 || max_features > dataset.n_features() {
        return Err(MlError::BadParam(format!(
            "max_features must be in 1..={}, got {max_features}",
            dataset.n_features()
        )));
    }
    let columns: Vec<Vec<u32>> = dataset
        .features
        .columns()
        .into_iter()
        .map(|col| bin_feature(col.as_standard_layout().as_slice().unwrap(), bins).map(|(c, _)| c))
        .collect::<Result<_>>()?;

    // Candidates in name order; the strict `>` below then resolves exact
    // ties toward the alphabetically first feature.
    let mut candidates: Vec<usize> = (0..dataset.n_features()).collect();
    candidates.sort_by(|&a, &b| dataset.feature_names[a].cmp(&dataset.feature_names[b]));

    let mut selected: Vec<usize> = Vec::new();
    let mut steps: Vec<SelectionStep> = Vec::new();
    let mut current_mi = 0.0;
    while selected.len() < max_features {
        let mut best: Option<(usize, f64)> = None;
        for &cand in &candidates {
            if selected.contains(&cand) {
                continue;
            }
            let mut joint: Vec<&[u32]> = selected.iter().map(|&i| columns[i].as_slice()).collect();
            joint.push(&columns[cand]);
            let mi = mutual_information(&joint, &dataset.labels)?;
            if best.is_none_or(|(_, best_mi)| mi > best_mi) {
                best = Some((cand, mi));
            }
        }
        let Some((winner, joint_mi)) = best else { break };
        let gain = joint_mi - current_mi;
        if gain <= GAIN_EPSILON {
            break;
        }
        selected.push(winner);
        steps.push(SelectionStep {
            feature: dataset.feature_names[winner].clone(),
            joint_mi_bits: joint_mi,
            gain_bits: gain,
        });
        current_mi = joint_mi;
    }
    Ok(steps)
}
