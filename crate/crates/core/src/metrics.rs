//! Classification metrics and resource accounting.
//!
//! Confusion counts, accuracy/precision/recall/F1 with explicit
//! zero-denominator conventions, tie-grouped trapezoidal ROC AUC
//! (equivalent to the Mann-Whitney pairwise statistic with half credit
//! for ties), and the parameters/FLOPs/timing profile reported by the
//! benchmark harness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The positive class is anomaly = 1 throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Tally predictions against labels. Any nonzero bit counts as positive.
pub fn confusion(predictions: &[u8], labels: &[u8]) -> Result<ConfusionCounts> {
    if predictions.len() != labels.len() {
        return Err(Error::Input(format!(
            "confusion: {} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Input("confusion: empty input".into()));
    }
    let mut c = ConfusionCounts { tp: 0, tn: 0, fp: 0, fn_: 0 };
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p != 0, l != 0) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Accuracy, precision, recall and F1 from confusion counts.
///
/// Zero-denominator conventions: precision with tp+fp=0 is 0, recall with
/// tp+fn=0 is 0, and F1 with precision+recall=0 is 0, so a degenerate
/// classifier scores poorly instead of aborting a benchmark run.
pub fn classification_metrics(c: &ConfusionCounts) -> Result<ClassificationMetrics> {
    let total = c.total();
    if total == 0 {
        return Err(Error::Input("classification_metrics: zero total".into()));
    }
    let accuracy = (c.tp + c.tn) as f64 / total as f64;
    let precision = if c.tp + c.fp == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let recall = if c.tp + c.fn_ == 0 {
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ClassificationMetrics { accuracy, precision, recall, f1 })
}

/// Points of the empirical ROC curve as (threshold, fpr, tpr), one step per
/// distinct score value, swept from the highest score down. The leading
/// point is (+inf, 0, 0) and the trailing point (lowest score, 1, 1).
pub fn roc_points(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64, f64)>> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut points = vec![(f64::INFINITY, 0.0, 0.0)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        // Group ties into a single threshold step.
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((s, fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

/// Area under the empirical ROC curve by trapezoidal integration over the
/// tie-grouped threshold sweep. Identical (up to float summation) to the
/// pairwise statistic (wins + ties/2) / (P*N).
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let points = roc_points(scores, labels)?;
    let mut auc = 0.0;
    for w in points.windows(2) {
        let (_, x1, y1) = w[0];
        let (_, x2, y2) = w[1];
        auc += (x2 - x1) * (y1 + y2) / 2.0;
    }
    Ok(auc)
}

fn class_counts(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Input(format!(
            "roc: {} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("roc: non-finite score".into()));
    }
    let pos = labels.iter().filter(|&&l| l != 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "roc_auc requires both classes present".into(),
        ));
    }
    Ok((pos, neg))
}

/// Deterministic size/cost counts plus wall-clock timings for a run.
/// Timings are reported, never asserted: they are machine-dependent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceProfile {
    /// Adjustable parameters, in millions.
    pub parameters_m: f64,
    /// Floating-point ops for one inference, in billions.
    pub flops_g: f64,
    pub inference_time_ms: f64,
    pub training_time_s: f64,
}

/// Assemble the resource profile from raw counts and timers.
pub fn resource_profile(
    parameters: u64,
    inference_flops: u64,
    inference_time: std::time::Duration,
    training_time: std::time::Duration,
) -> ResourceProfile {
    ResourceProfile {
        parameters_m: parameters as f64 / 1e6,
        flops_g: inference_flops as f64 / 1e9,
        inference_time_ms: inference_time.as_secs_f64() * 1e3,
        training_time_s: training_time.as_secs_f64(),
    }
}

/// One labeled row of a metrics comparison table.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub name: String,
    pub metrics: ClassificationMetrics,
    pub auc: f64,
}

/// Render rows in the benchmark table layout (percentages, two decimals):
/// Model | Accuracy | Recall | F1 Score | AUC.
pub fn format_metrics_table(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<20} {:>9} {:>8} {:>9} {:>7}\n",
        "Model", "Accuracy", "Recall", "F1 Score", "AUC"
    ));
    for row in rows {
        out.push_str(&format!(
            "{:<20} {:>9.2} {:>8.2} {:>9.2} {:>7.2}\n",
            row.name,
            row.metrics.accuracy * 100.0,
            row.metrics.recall * 100.0,
            row.metrics.f1 * 100.0,
            row.auc * 100.0,
        ));
    }
    out
}
