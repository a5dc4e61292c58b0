//! Classification metrics: misclassification rate, confusion-matrix
//! summaries, ROC curves and distribution summaries over replications.

use serde::Serialize;

use crate::error::{Error, Result};

/// Fraction of mismatched predictions.
pub fn msr(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::invalid("predictions", "no predictions to score"));
    }
    let wrong = y_true.iter().zip(y_pred).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / y_true.len() as f64)
}

/// Counts indexed `(true class, predicted class)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn from_predictions(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::DimensionMismatch {
                expected: y_true.len(),
                got: y_pred.len(),
            });
        }
        let mut counts = vec![vec![0; n_classes]; n_classes];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            if t >= n_classes || p >= n_classes {
                return Err(Error::invalid("labels", format!("class index out of range 0..{n_classes}")));
            }
            counts[t][p] += 1;
        }
        Ok(Self { counts })
    }

    pub fn from_counts(counts: Vec<Vec<usize>>) -> Result<Self> {
        let g = counts.len();
        if counts.iter().any(|r| r.len() != g) {
            return Err(Error::invalid("counts", "confusion matrix must be square"));
        }
        Ok(Self { counts })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, predicted: usize) -> usize {
        self.counts[truth][predicted]
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, g: usize) -> usize {
        self.counts[g].iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: usize = (0..self.n_classes()).map(|g| self.counts[g][g]).sum();
        diag as f64 / self.total() as f64
    }

    /// One-vs-rest `(tp, fn, fp, tn)` for class `g`.
    pub fn one_vs_rest(&self, g: usize) -> (usize, usize, usize, usize) {
        let tp = self.counts[g][g];
        let fn_ = self.support(g) - tp;
        let predicted: usize = self.counts.iter().map(|r| r[g]).sum();
        let fp = predicted - tp;
        let tn = self.total() - tp - fn_ - fp;
        (tp, fn_, fp, tn)
    }
}

/// Per-class metrics; `None` where the defining ratio has a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn class_metrics(cm: &ConfusionMatrix, g: usize) -> Result<ClassMetrics> {
    if g >= cm.n_classes() {
        return Err(Error::invalid("class", format!("index {g} out of range")));
    }
    let (tp, fn_, fp, tn) = cm.one_vs_rest(g);
    let recall = ratio(tp, tp + fn_);
    let specificity = ratio(tn, tn + fp);
    Ok(ClassMetrics {
        recall,
        specificity,
        balanced_accuracy: recall.zip(specificity).map(|(r, s)| (r + s) / 2.0),
        precision: ratio(tp, tp + fp),
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
    })
}

/// Support-weighted mean of the per-class F1 scores.
pub fn weighted_f1(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total() as f64;
    (0..cm.n_classes())
        .filter_map(|g| {
            let f1 = class_metrics(cm, g).expect("index in range").f1?;
            Some(f1 * cm.support(g) as f64 / total)
        })
        .sum()
}

/// One-vs-rest ROC curve; the first point is `(0, 0)` at threshold `+∞`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auc: f64,
}

/// ROC of `scores` for detecting class `g` among `labels`.
pub fn roc_auc(scores: &[f64], labels: &[usize], g: usize) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores", "NaN score"));
    }
    let pos = labels.iter().filter(|&&y| y == g).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("labels", "ROC needs both positives and negatives"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut thresholds = vec![f64::INFINITY];
    let (mut fpr, mut tpr) = (vec![0.0], vec![0.0]);
    let (mut tp, mut fp) = (0usize, 0usize);
    // Twice the area in units of one (positive, negative) pair.
    let mut doubled = 0usize;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] == g {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        doubled += (fp - fp0) * (tp + tp0);
        thresholds.push(t);
        fpr.push(fp as f64 / neg as f64);
        tpr.push(tp as f64 / pos as f64);
    }
    Ok(RocCurve {
        thresholds,
        fpr,
        tpr,
        auc: doubled as f64 / (2 * pos * neg) as f64,
    })
}

/// Linear-interpolation quantile (type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&p));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::invalid("values", "nothing to summarize"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("values", "NaN value"));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(Summary {
        min: s[0],
        q1: quantile_sorted(&s, 0.25),
        median: quantile_sorted(&s, 0.5),
        mean: s.iter().sum::<f64>() / s.len() as f64,
        q3: quantile_sorted(&s, 0.75),
        max: s[s.len() - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn msr_examples() {
        assert_eq!(msr(&[0, 1, 2], &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(msr(&[0, 1, 2], &[1, 2, 0]).unwrap(), 1.0);
        let truth = vec![0; 638];
        let mut pred = vec![0; 638];
        pred[..76].iter_mut().for_each(|p| *p = 1);
        let v = msr(&truth, &pred).unwrap();
        assert!((v - 76.0 / 638.0).abs() < 1e-15);
        assert!((v - 0.1191).abs() < 1e-4);
        assert!(msr(&[0], &[0, 1]).is_err());
        assert!(msr(&[], &[]).is_err());
    }

    #[test]
    fn two_by_two_counts() {
        // Class 0 positive: TP=3, FN=1, FP=1, TN=5.
        let cm = ConfusionMatrix::from_counts(vec![vec![3, 1], vec![1, 5]]).unwrap();
        let m = class_metrics(&cm, 0).unwrap();
        assert_eq!(m.recall, Some(0.75));
        assert!((m.specificity.unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert!((m.balanced_accuracy.unwrap() - 0.7917).abs() < 5e-5);
        assert_eq!(m.precision, Some(0.75));
        assert_eq!(m.f1, Some(0.75));
        assert_eq!(cm.accuracy(), 0.8);
    }

    #[test]
    fn balanced_accuracy_is_the_mean() {
        let b: f64 = (0.9570 + 0.6500) / 2.0;
        assert!((b - 0.8035).abs() < 1e-12);
        // 957 of 1000 positives found, 65 of 100 negatives rejected.
        let cm = ConfusionMatrix::from_counts(vec![vec![957, 43], vec![35, 65]]).unwrap();
        let m = class_metrics(&cm, 0).unwrap();
        assert!((m.balanced_accuracy.unwrap() - 0.8035).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_undefined() {
        let cm = ConfusionMatrix::from_predictions(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap();
        for g in 0..3 {
            let m = class_metrics(&cm, g).unwrap();
            for v in [m.recall, m.specificity, m.balanced_accuracy, m.precision, m.f1] {
                assert_eq!(v, Some(1.0));
            }
        }
        assert_eq!(weighted_f1(&cm), 1.0);

        let cm = ConfusionMatrix::from_predictions(&[0, 0, 1], &[0, 0, 0], 3).unwrap();
        let absent = class_metrics(&cm, 2).unwrap();
        assert_eq!(absent.recall, None);
        assert_eq!(absent.precision, None);
        assert_eq!(absent.f1, None);
        assert_eq!(absent.balanced_accuracy, None);
        assert_eq!(absent.specificity, Some(1.0));
        let never_predicted = class_metrics(&cm, 1).unwrap();
        assert_eq!(never_predicted.recall, Some(0.0));
        assert_eq!(never_predicted.precision, None);
        assert_eq!(never_predicted.f1, Some(0.0));
    }

    #[test]
    fn weighted_f1_by_support() {
        let cm = ConfusionMatrix::from_counts(vec![vec![3, 1], vec![1, 5]]).unwrap();
        let f0 = 6.0 / 8.0;
        let f1 = 10.0 / 12.0;
        assert!((weighted_f1(&cm) - (4.0 * f0 + 6.0 * f1) / 10.0).abs() < 1e-15);
    }

    #[test]
    fn confusion_invariants() {
        let t = [0, 1, 1, 2, 2, 2, 0];
        let p = [0, 2, 1, 2, 0, 2, 1];
        let cm = ConfusionMatrix::from_predictions(&t, &p, 3).unwrap();
        assert_eq!(cm.total(), 7);
        assert_eq!((cm.support(0), cm.support(1), cm.support(2)), (2, 2, 3));
        assert!((cm.accuracy() - (1.0 - msr(&t, &p).unwrap())).abs() < 1e-15);
        assert!(ConfusionMatrix::from_predictions(&[3], &[0], 3).is_err());
    }

    #[test]
    fn auc_examples() {
        let r = roc_auc(&[0.9, 0.8, 0.4], &[1, 0, 1], 1).unwrap();
        assert_eq!(r.auc, 0.5);
        assert_eq!(roc_auc(&[0.9, 0.8, 0.1, 0.2], &[1, 1, 0, 0], 1).unwrap().auc, 1.0);
        let flat = roc_auc(&[0.3; 5], &[0, 1, 1, 0, 1], 1).unwrap();
        assert_eq!(flat.auc, 0.5);
        assert_eq!(flat.fpr, vec![0.0, 1.0]);
        assert!(roc_auc(&[0.1, 0.2], &[1, 1], 1).is_err());
    }

    #[test]
    fn roc_shape() {
        let r = roc_auc(&[0.1, 0.7, 0.7, 0.3, 0.9, 0.5], &[0, 1, 0, 1, 1, 0], 1).unwrap();
        assert_eq!((r.fpr[0], r.tpr[0]), (0.0, 0.0));
        assert_eq!((*r.fpr.last().unwrap(), *r.tpr.last().unwrap()), (1.0, 1.0));
        assert!(r.fpr.windows(2).all(|w| w[0] <= w[1]));
        assert!(r.tpr.windows(2).all(|w| w[0] <= w[1]));
        assert!(r.thresholds.windows(2).all(|w| w[0] > w[1]));
    }

    fn mann_whitney(scores: &[f64], labels: &[usize], g: usize) -> f64 {
        let mut s = 0.0;
        let mut pairs = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] == g && labels[j] != g {
                    pairs += 1.0;
                    if si > sj {
                        s += 1.0;
                    } else if si == sj {
                        s += 0.5;
                    }
                }
            }
        }
        s / pairs
    }

    proptest! {
        #[test]
        fn auc_equals_mann_whitney(
            items in prop::collection::vec((0u8..6, 0usize..3), 2..60),
        ) {
            let scores: Vec<f64> = items.iter().map(|(s, _)| *s as f64 / 5.0).collect();
            let labels: Vec<usize> = items.iter().map(|(_, y)| *y).collect();
            for g in 0..3 {
                let pos = labels.iter().filter(|&&y| y == g).count();
                if pos == 0 || pos == labels.len() {
                    continue;
                }
                let r = roc_auc(&scores, &labels, g).unwrap();
                prop_assert!((r.auc - mann_whitney(&scores, &labels, g)).abs() <= 1e-12);
            }
        }

        #[test]
        fn msr_is_permutation_invariant(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..50), rot in 0usize..50) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
            let k = rot % pairs.len();
            let mut t2 = t.clone();
            let mut p2 = p.clone();
            t2.rotate_left(k);
            p2.rotate_left(k);
            prop_assert_eq!(msr(&t, &p).unwrap(), msr(&t2, &p2).unwrap());
        }
    }

    #[test]
    fn type7_quartiles() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 1.75, 2.5, 3.25, 4.0));
        assert_eq!(s.mean, 2.5);
        let one = summarize(&[0.12]).unwrap();
        assert_eq!((one.q1, one.median, one.mean, one.q3), (0.12, 0.12, 0.12, 0.12));
        assert!(summarize(&[]).is_err());
    }
}
