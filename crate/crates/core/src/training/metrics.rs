use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Single-label multiclass scores. Micro precision, recall and F1 all
/// equal accuracy here: every wrong prediction is one false positive for
/// the predicted class and one false negative for the true class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision_micro: f64,
    pub recall_micro: f64,
    pub f1_micro: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Rows are true classes, columns predictions.
    pub confusion_matrix: Vec<Vec<u64>>,
}

fn ratio(num: u64, den: u64, what: &str, class: usize) -> f64 {
    if den == 0 {
        log::warn!("{what} of class {class} has a zero denominator; reported as 0");
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

pub fn compute_metrics(y_true: &[usize], y_pred: &[usize], num_classes: usize) -> Result<Metrics> {
    if y_true.is_empty() {
        return Err(Error::Empty("no predictions to score".into()));
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::shape(
            "compute_metrics",
            format!("{} labels vs {} predictions", y_true.len(), y_pred.len()),
        ));
    }
    let mut confusion = vec![vec![0u64; num_classes]; num_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for (what, v) in [("true label", t), ("predicted label", p)] {
            if v >= num_classes {
                return Err(Error::OutOfRange {
                    what,
                    index: v,
                    size: num_classes,
                });
            }
        }
        confusion[t][p] += 1;
    }
    let n = y_true.len() as u64;
    let correct: u64 = (0..num_classes).map(|c| confusion[c][c]).sum();
    let mut per_class = Vec::with_capacity(num_classes);
    let (mut fp_total, mut fn_total) = (0u64, 0u64);
    for c in 0..num_classes {
        let tp = confusion[c][c];
        let predicted: u64 = (0..num_classes).map(|r| confusion[r][c]).sum();
        let support: u64 = confusion[c].iter().sum();
        fp_total += predicted - tp;
        fn_total += support - tp;
        let precision = ratio(tp, predicted, "precision", c);
        let recall = ratio(tp, support, "recall", c);
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1: f1(precision, recall),
            support,
        });
    }
    let precision_micro = correct as f64 / (correct + fp_total) as f64;
    let recall_micro = correct as f64 / (correct + fn_total) as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / num_classes as f64;
    Ok(Metrics {
        accuracy: correct as f64 / n as f64,
        precision_micro,
        recall_micro,
        f1_micro: (2 * correct) as f64 / (2 * correct + fp_total + fn_total) as f64,
        precision_macro: mean(|m| m.precision),
        recall_macro: mean(|m| m.recall),
        f1_macro: mean(|m| m.f1),
        per_class,
        confusion_matrix: confusion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n − 1); 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub folds: usize,
    pub accuracy: MeanStd,
    pub precision_micro: MeanStd,
    pub recall_micro: MeanStd,
    pub f1_micro: MeanStd,
    pub precision_macro: MeanStd,
    pub recall_macro: MeanStd,
    pub f1_macro: MeanStd,
}

pub fn summarize_folds(folds: &[Metrics]) -> Result<FoldSummary> {
    if folds.is_empty() {
        return Err(Error::Empty("no fold metrics to summarize".into()));
    }
    let col = |f: fn(&Metrics) -> f64| MeanStd::of(&folds.iter().map(f).collect::<Vec<_>>());
    Ok(FoldSummary {
        folds: folds.len(),
        accuracy: col(|m| m.accuracy),
        precision_micro: col(|m| m.precision_micro),
        recall_micro: col(|m| m.recall_micro),
        f1_micro: col(|m| m.f1_micro),
        precision_macro: col(|m| m.precision_macro),
        recall_macro: col(|m| m.recall_macro),
        f1_macro: col(|m| m.f1_macro),
    })
}
