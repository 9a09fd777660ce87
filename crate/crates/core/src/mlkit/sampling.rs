//! Class balancing and stratified cross-validation splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, MlError, Result};

/// Relative support the rarest (slowest) class receives after
/// three-class balancing.
const RARE_CLASS_SUPPORT: f64 = 0.10;

/// Rebalance class supports by seeded undersampling. Row order is
/// preserved and no row is ever duplicated.
///
/// Two classes: the majority is cut down to the minority's count. Three
/// classes: all samples of the last (rarest) class are kept at exactly
/// 10% relative support, and the remainder is split between the first
/// two classes in their original ratio, the rounding deficit going to
/// the larger of them.
pub fn balance(dataset: &Dataset, seed: u64) -> Result<Dataset> {
    let counts = dataset.class_counts();
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(MlError::EmptyClass(empty));
    }
    let targets = match counts.as_slice() {
        [a, b] => {
            let m = *a.min(b);
            vec![m, m]
        }
        [a, b, rare] => {
            let total = (*rare as f64 / RARE_CLASS_SUPPORT).round() as usize;
            let remaining = total - rare;
            let share_a = remaining as f64 * *a as f64 / (*a + *b) as f64;
            let mut t_a = share_a.floor() as usize;
            let mut t_b = (remaining as f64 - share_a).floor() as usize;
            let deficit = remaining - t_a - t_b;
            if a >= b {
                t_a += deficit;
            } else {
                t_b += deficit;
            }
            if t_a > *a || t_b > *b {
                return Err(MlError::BalanceInfeasible(format!(
                    "classes ({a}, {b}, {rare}) cannot reach supports \
                     ({t_a}, {t_b}, {rare}) by undersampling"
                )));
            }
            vec![t_a, t_b, *rare]
        }
        other => {
            return Err(MlError::BadParam(format!(
                "balancing supports 2 or 3 classes, got {}",
                other.len()
            )))
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept: Vec<usize> = Vec::new();
    for (class, &target) in targets.iter().enumerate() {
        let mut members: Vec<usize> = (0..dataset.n_rows())
            .filter(|&i| dataset.labels[i] == class)
            .collect();
        members.shuffle(&mut rng);
        kept.extend_from_slice(&members[..target]);
    }
    kept.sort_unstable();
    dataset.subset(&kept)
}

/// One train/test split; indices refer to the dataset the folds were
/// built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// Stratified k-fold partition: per-class counts across folds differ by
/// at most one, folds are disjoint and jointly exhaustive, and the
/// assignment is deterministic under the seed.
pub fn stratified_kfold(
    labels: &[usize],
    n_classes: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<FoldSplit>> {
    if k < 2 {
        return Err(MlError::BadParam("k must be at least 2".into()));
    }
    if labels.is_empty() {
        return Err(MlError::EmptyInput("no labels to split"));
    }
    let mut fold_members: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(MlError::Stratification {
                class,
                count: members.len(),
                k,
            });
        }
        members.shuffle(&mut rng);
        // Offset the round-robin start per class so remainder samples do
        // not all land in the first folds.
        for (j, idx) in members.into_iter().enumerate() {
            fold_members[(j + class) % k].push(idx);
        }
    }
    Ok((0..k)
        .map(|f| {
            let mut test_idx = fold_members[f].clone();
            test_idx.sort_unstable();
            let mut train_idx: Vec<usize> = (0..k)
                .filter(|&g| g != f)
                .flat_map(|g| fold_members[g].iter().copied())
                .collect();
            train_idx.sort_unstable();
            FoldSplit { train_idx, test_idx }
        })
        .collect())
}
