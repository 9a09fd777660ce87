//! Classification metrics and reports.

use std::fmt::Write as _;

use super::{MlError, Result};

/// Per-class precision/recall/f1 with supports and the confusion matrix
/// they all derive from.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub n_classes: usize,
    /// `confusion[actual][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    /// Fraction of the evaluation set in each class; sums to 1.
    pub support: Vec<f64>,
    pub support_counts: Vec<usize>,
    pub accuracy: f64,
    /// Classes whose precision or recall had a zero denominator and were
    /// defined as 0.
    pub zero_denominator_classes: Vec<usize>,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

impl ClassReport {
    /// Derive every metric from a confusion matrix of
    /// `confusion[actual][predicted]` counts.
    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Result<ClassReport> {
        let n_classes = confusion.len();
        if n_classes == 0 || confusion.iter().any(|row| row.len() != n_classes) {
            return Err(MlError::BadParam("confusion matrix must be square".into()));
        }
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(MlError::EmptyInput("confusion matrix has no samples"));
        }
        let mut precision = vec![0.0; n_classes];
        let mut recall = vec![0.0; n_classes];
        let mut f1 = vec![0.0; n_classes];
        let mut support = vec![0.0; n_classes];
        let mut support_counts = vec![0; n_classes];
        let mut zero_denominator_classes = Vec::new();
        let mut correct = 0usize;
        for c in 0..n_classes {
            let tp = confusion[c][c];
            correct += tp;
            let actual: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[c]).sum();
            support_counts[c] = actual;
            support[c] = actual as f64 / total as f64;
            if actual == 0 || predicted == 0 {
                zero_denominator_classes.push(c);
            }
            recall[c] = if actual > 0 { tp as f64 / actual as f64 } else { 0.0 };
            precision[c] = if predicted > 0 { tp as f64 / predicted as f64 } else { 0.0 };
            f1[c] = f1_score(precision[c], recall[c]);
        }
        Ok(ClassReport {
            n_classes,
            confusion,
            precision,
            recall,
            f1,
            support,
            support_counts,
            accuracy: correct as f64 / total as f64,
            zero_denominator_classes,
        })
    }

    pub fn total_samples(&self) -> usize {
        self.support_counts.iter().sum()
    }

    /// Render with optional class names ("class N" otherwise).
    pub fn render(&self, class_names: Option<&[&str]>) -> String {
        let name = |c: usize| -> String {
            class_names
                .and_then(|names| names.get(c))
                .map_or_else(|| format!("class {c}"), |n| n.to_string())
        };
        let mut s = String::new();
        let _ = writeln!(s, "{:>12} {:>9} {:>9} {:>9} {:>9}", "", "precision", "recall", "f1", "support");
        for c in 0..self.n_classes {
            let _ = writeln!(
                s,
                "{:>12} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                name(c),
                self.precision[c],
                self.recall[c],
                self.f1[c],
                self.support[c]
            );
        }
        let _ = writeln!(
            s,
            "accuracy {:.4} over {} samples",
            self.accuracy,
            self.total_samples()
        );
        s
    }
}

/// Build a report from parallel actual/predicted label sequences.
pub fn report_from_predictions(
    actual: &[usize],
    predicted: &[usize],
    n_classes: usize,
) -> Result<ClassReport> {
    if actual.len() != predicted.len() {
        return Err(MlError::ShapeMismatch {
            expected: actual.len(),
            got: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(MlError::EmptyInput("no predictions to score"));
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&a, &p) in actual.iter().zip(predicted) {
        if a >= n_classes || p >= n_classes {
            return Err(MlError::BadParam(format!(
                "label {} out of range for {n_classes} classes",
                a.max(p)
            )));
        }
        confusion[a][p] += 1;
    }
    ClassReport::from_confusion(confusion)
}

/// Score the constant predictor that always answers the most frequent
/// class (lowest index on ties). Its accuracy is that class's prior.
pub fn majority_baseline(labels: &[usize], n_classes: usize) -> Result<ClassReport> {
    if labels.is_empty() {
        return Err(MlError::EmptyInput("no labels"));
    }
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        if l >= n_classes {
            return Err(MlError::BadParam(format!(
                "label {l} out of range for {n_classes} classes"
            )));
        }
        counts[l] += 1;
    }
    let majority = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(std::cmp::Ordering::Greater))
        .map(|(c, _)| c)
        .expect("non-empty counts");
    let predicted = vec![majority; labels.len()];
    report_from_predictions(labels, &predicted, n_classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn f1_is_the_harmonic_mean() {
        assert_relative_eq!(f1_score(0.8510, 0.9203), 0.8843, epsilon = 1e-4);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
        assert_eq!(f1_score(1.0, 1.0), 1.0);
    }

    #[test]
    fn accuracy_is_support_weighted_recall() {
        let report = ClassReport::from_confusion(vec![
            vec![50, 10, 2],
            vec![8, 30, 4],
            vec![1, 3, 12],
        ])
        .unwrap();
        let weighted: f64 = report
            .support
            .iter()
            .zip(&report.recall)
            .map(|(s, r)| s * r)
            .sum();
        assert_relative_eq!(report.accuracy, weighted, epsilon = 1e-12);
        let support_sum: f64 = report.support.iter().sum();
        assert_relative_eq!(support_sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn published_binary_fixture_identities_hold() {
        // A two-class report with supports 0.7773/0.2227 and recalls
        // 0.9203/0.4372 must come out at overall accuracy 0.8127.
        let supports = [0.7773, 0.2227];
        let recalls = [0.9203, 0.4372];
        let accuracy: f64 = supports.iter().zip(&recalls).map(|(s, r)| s * r).sum();
        assert_relative_eq!(accuracy, 0.8127, epsilon = 1e-4);
    }

    #[test]
    fn balanced_two_class_accuracy_fixture() {
        let accuracy = 0.5 * 0.6954 + 0.5 * 0.7817;
        assert_relative_eq!(accuracy, 0.7385, epsilon = 5e-4);
    }

    #[test]
    fn perfect_predictions_score_one_everywhere() {
        let actual = vec![0, 1, 2, 0, 1, 2];
        let report = report_from_predictions(&actual, &actual, 3).unwrap();
        assert_eq!(report.accuracy, 1.0);
        for c in 0..3 {
            assert_eq!(report.precision[c], 1.0);
            assert_eq!(report.recall[c], 1.0);
            assert_eq!(report.f1[c], 1.0);
        }
        assert!(report.zero_denominator_classes.is_empty());
    }

    #[test]
    fn zero_denominators_are_defined_zero_and_flagged() {
        // Class 2 never occurs and is never predicted.
        let actual = vec![0, 0, 1, 1];
        let predicted = vec![0, 1, 1, 1];
        let report = report_from_predictions(&actual, &predicted, 3).unwrap();
        assert_eq!(report.precision[2], 0.0);
        assert_eq!(report.recall[2], 0.0);
        assert_eq!(report.f1[2], 0.0);
        assert_eq!(report.zero_denominator_classes, vec![2]);
    }

    #[test]
    fn majority_baseline_accuracy_is_the_prior() {
        let labels: Vec<usize> = std::iter::repeat_n(0, 70).chain(std::iter::repeat_n(1, 30)).collect();
        let report = majority_baseline(&labels, 2).unwrap();
        assert_relative_eq!(report.accuracy, 0.70);
        // Balanced labels: the tie goes to class 0, accuracy one half.
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let report = majority_baseline(&labels, 2).unwrap();
        assert_relative_eq!(report.accuracy, 0.50);
        assert_eq!(report.recall[0], 1.0);
        assert_eq!(report.recall[1], 0.0);
    }

    #[test]
    fn confusion_matrix_round_trip_counts() {
        let actual = vec![0, 0, 1, 1, 1];
        let predicted = vec![0, 1, 1, 1, 0];
        let report = report_from_predictions(&actual, &predicted, 2).unwrap();
        assert_eq!(report.confusion, vec![vec![1, 1], vec![1, 2]]);
        assert_eq!(report.support_counts, vec![2, 3]);
        assert_relative_eq!(report.accuracy, 0.6);
    }

    #[test]
    fn render_mentions_accuracy() {
        let report = report_from_predictions(&[0, 1], &[0, 1], 2).unwrap();
        let text = report.render(Some(&["<=50ms", ">50ms"]));
        assert!(text.contains("<=50ms"));
        assert!(text.contains("accuracy 1.0000"));
    }
}
