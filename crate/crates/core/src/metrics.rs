use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    /// Component-wise `self - previous`.
    pub fn minus(&self, previous: &Metrics) -> Metrics {
        Metrics {
            accuracy: self.accuracy - previous.accuracy,
            precision: self.precision - previous.precision,
            recall: self.recall - previous.recall,
            f1: self.f1 - previous.f1,
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Accuracy plus precision/recall/F1 of class 1 for two classes, macro
/// averaged over all classes otherwise. Undefined ratios count as 0.
pub fn classification_metrics(predicted: &[usize], gold: &[usize], n_classes: usize) -> Metrics {
    assert_eq!(predicted.len(), gold.len(), "prediction/gold length mismatch");
    let correct = predicted.iter().zip(gold).filter(|(p, g)| p == g).count();
    let accuracy = ratio(correct, gold.len());
    let per_class = |c: usize| {
        let tp = predicted.iter().zip(gold).filter(|&(&p, &g)| p == c && g == c).count();
        let pred_c = predicted.iter().filter(|&&p| p == c).count();
        let gold_c = gold.iter().filter(|&&g| g == c).count();
        let (p, r) = (ratio(tp, pred_c), ratio(tp, gold_c));
        (p, r, f1(p, r))
    };
    let (precision, recall, f1) = if n_classes == 2 {
        per_class(1)
    } else {
        let n = n_classes.max(1) as f64;
        let sums = (0..n_classes).map(per_class).fold((0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
        (sums.0 / n, sums.1 / n, sums.2 / n)
    };
    Metrics { accuracy, precision, recall, f1 }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
