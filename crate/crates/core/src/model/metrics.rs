use serde::{Deserialize, Serialize};

/// Binary classification metrics; index 0 = non-fake, 1 = fake.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub accuracy: f64,
    pub f1_weighted: f64,
    pub f1_per_class: [f64; 2],
    pub precision: [f64; 2],
    pub recall: [f64; 2],
    pub support: [usize; 2],
}

/// Per-class precision/recall/F1 (0 when undefined) and the support-weighted F1.
pub fn classification_metrics(truth: &[usize], predicted: &[usize]) -> ClassMetrics {
    assert_eq!(truth.len(), predicted.len(), "prediction count");
    let mut confusion = [[0usize; 2]; 2];
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[t][p] += 1;
    }
    let total = truth.len();
    let correct = confusion[0][0] + confusion[1][1];
    let mut m = ClassMetrics {
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        f1_weighted: 0.0,
        f1_per_class: [0.0; 2],
        precision: [0.0; 2],
        recall: [0.0; 2],
        support: [confusion[0][0] + confusion[0][1], confusion[1][0] + confusion[1][1]],
    };
    for c in 0..2 {
        let tp = confusion[c][c] as f64;
        let predicted_c = (confusion[0][c] + confusion[1][c]) as f64;
        let actual_c = m.support[c] as f64;
        let p = if predicted_c > 0.0 { tp / predicted_c } else { 0.0 };
        let r = if actual_c > 0.0 { tp / actual_c } else { 0.0 };
        m.precision[c] = p;
        m.recall[c] = r;
        m.f1_per_class[c] = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        if total > 0 {
            m.f1_weighted += actual_c / total as f64 * m.f1_per_class[c];
        }
    }
    m
}

/// Weighted F1 of always predicting the majority class of `train_truth`.
pub fn majority_baseline(train_truth: &[usize], test_truth: &[usize]) -> ClassMetrics {
    let ones = train_truth.iter().filter(|&&c| c == 1).count();
    let majority = usize::from(2 * ones > train_truth.len());
    classification_metrics(test_truth, &vec![majority; test_truth.len()])
}
