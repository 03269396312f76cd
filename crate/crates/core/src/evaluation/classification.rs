use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::curation::SequenceClass;

/// Counts over [`SequenceClass`] labels, rows = truth, columns = predicted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<SequenceClass>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<SequenceClass>) -> Self {
        let k = classes.len();
        Self {
            classes,
            counts: vec![vec![0; k]; k],
        }
    }

    /// Matrix over all five classes from `(truth, predicted)` pairs.
    pub fn from_pairs<I: IntoIterator<Item = (SequenceClass, SequenceClass)>>(pairs: I) -> Self {
        let mut cm = Self::new(vec![
            SequenceClass::T1WI,
            SequenceClass::GdT1WI,
            SequenceClass::T2WI,
            SequenceClass::FLAIR,
            SequenceClass::NonSegmentable,
        ]);
        for (t, p) in pairs {
            cm.record(t, p);
        }
        cm
    }

    fn index(&self, c: SequenceClass) -> usize {
        self.classes.iter().position(|&x| x == c).expect("class in matrix")
    }

    pub fn record(&mut self, truth: SequenceClass, predicted: SequenceClass) {
        let (i, j) = (self.index(truth), self.index(predicted));
        self.counts[i][j] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: SequenceClass,
    /// Scans whose truth is this class.
    pub support: u64,
    /// Scans predicted as this class.
    pub predicted: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when a ratio was 0/0 and reported as 0.
    pub undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub total: u64,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn classification_report(cm: &ConfusionMatrix) -> Result<ClassificationReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let k = cm.classes.len();
    let trace: u64 = (0..k).map(|i| cm.counts[i][i]).sum();
    let per_class = (0..k)
        .map(|i| {
            let tp = cm.counts[i][i];
            let support: u64 = cm.counts[i].iter().sum();
            let predicted: u64 = cm.counts.iter().map(|r| r[i]).sum();
            let (precision, u1) = ratio(tp, predicted);
            let (recall, u2) = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                class: cm.classes[i],
                support,
                predicted,
                precision,
                recall,
                f1,
                undefined: u1 || u2,
            }
        })
        .collect();
    Ok(ClassificationReport {
        total,
        accuracy: trace as f64 / total as f64,
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SequenceClass::*;

    fn two_class(c: [[u64; 2]; 2]) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::new(vec![T1WI, T2WI]);
        cm.counts = c.iter().map(|r| r.to_vec()).collect();
        cm
    }

    #[test]
    fn diagonal_is_perfect() {
        let r = classification_report(&two_class([[5, 0], [0, 7]])).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert!(r.per_class.iter().all(|m| m.f1 == 1.0));
    }

    #[test]
    fn hand_arithmetic() {
        let r = classification_report(&two_class([[8, 2], [1, 9]])).unwrap();
        assert!((r.accuracy - 0.85).abs() < 1e-15);
        assert!((r.per_class[0].precision - 8.0 / 9.0).abs() < 1e-15);
        assert!((r.per_class[0].recall - 0.8).abs() < 1e-15);
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(classification_report(&two_class([[0, 0], [0, 0]])), Err(EvalError::EmptyMatrix)));
    }

    #[test]
    fn zero_over_zero_flagged() {
        let r = classification_report(&two_class([[4, 0], [0, 0]])).unwrap();
        assert_eq!(r.per_class[1].precision, 0.0);
        assert!(r.per_class[1].undefined);
        assert!(!r.per_class[0].undefined);
    }

    proptest! {
        #[test]
        fn sums_conserve_total(pairs in proptest::collection::vec((0usize..5, 0usize..5), 1..200)) {
            let all = [T1WI, GdT1WI, T2WI, FLAIR, NonSegmentable];
            let cm = ConfusionMatrix::from_pairs(pairs.iter().map(|&(a, b)| (all[a], all[b])));
            let r = classification_report(&cm).unwrap();
            prop_assert_eq!(r.total, pairs.len() as u64);
            prop_assert_eq!(r.per_class.iter().map(|m| m.support).sum::<u64>(), r.total);
            prop_assert_eq!(r.per_class.iter().map(|m| m.predicted).sum::<u64>(), r.total);
        }
    }
}
