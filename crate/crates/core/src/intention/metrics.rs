use serde::{Deserialize, Serialize};

/// Macro-averaged three-class classification scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: [[usize; 3]; 3],
}

impl ClassificationMetrics {
    pub fn from_confusion(confusion: [[usize; 3]; 3]) -> Self {
        let total: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..3).map(|k| confusion[k][k]).sum();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
        for k in 0..3 {
            let tp = confusion[k][k];
            let predicted: usize = (0..3).map(|t| confusion[t][k]).sum();
            let actual: usize = confusion[k].iter().sum();
            let pk = ratio(tp, predicted);
            let rk = ratio(tp, actual);
            p += pk;
            r += rk;
            f += if pk + rk > 0.0 { 2.0 * pk * rk / (pk + rk) } else { 0.0 };
        }
        Self {
            precision: p / 3.0,
            recall: r / 3.0,
            f1: f / 3.0,
            accuracy: ratio(correct, total),
            confusion,
        }
    }

    pub fn from_predictions(truth: &[usize], predicted: &[usize]) -> Self {
        assert_eq!(truth.len(), predicted.len(), "prediction count mismatch");
        let mut confusion = [[0usize; 3]; 3];
        for (t, p) in truth.iter().zip(predicted) {
            confusion[*t][*p] += 1;
        }
        Self::from_confusion(confusion)
    }
}
