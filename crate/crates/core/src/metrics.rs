//! Binary classification metrics: confusion counts, support-weighted
//! precision / recall / F1, G-mean and rank-based ROC AUC.
//!
//! Class 1 is the positive class. Per-class quantities are one-vs-rest, and
//! the class weight `w_j` is the class support. A per-class ratio with a
//! zero denominator contributes 0 and bumps the warning counter.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {truth} labels vs {other} predictions/scores")]
    LengthMismatch { truth: usize, other: usize },
    #[error("no samples")]
    Empty,
    #[error("label {0} is not binary")]
    NonBinaryLabel(u8),
    #[error("AUC needs both classes present")]
    SingleClass,
    #[error("score {0} is not finite")]
    NonFiniteScore(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// One-vs-rest tallies for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassCounts {
    pub true_positives: usize,
    pub predicted_positives: usize,
    pub actual_positives: usize,
}

/// Per-class weights `w_j`, indexed by class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights(pub [f64; 2]);

/// A metric value with the number of zero-division fallbacks that went into it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checked {
    pub value: f64,
    pub warnings: u32,
}

fn check_binary(labels: &[u8]) -> Result<(), MetricError> {
    match labels.iter().find(|&&l| l > 1) {
        Some(&l) => Err(MetricError::NonBinaryLabel(l)),
        None => Ok(()),
    }
}

fn ratio(num: usize, den: usize, warnings: &mut u32) -> f64 {
    if den == 0 {
        *warnings += 1;
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(truth: &[u8], preds: &[u8]) -> Result<ConfusionCounts, MetricError> {
    if truth.len() != preds.len() {
        return Err(MetricError::LengthMismatch {
            truth: truth.len(),
            other: preds.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricError::Empty);
    }
    check_binary(truth)?;
    check_binary(preds)?;
    let mut c = ConfusionCounts::default();
    for (&t, &p) in truth.iter().zip(preds) {
        match (t, p) {
            (1, 1) => c.tp += 1,
            (0, 1) => c.fp += 1,
            (0, 0) => c.tn += 1,
            _ => c.fn_ += 1,
        }
    }
    Ok(c)
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `[class 0, class 1]` one-vs-rest tallies.
    pub fn per_class(&self) -> [ClassCounts; 2] {
        [
            ClassCounts {
                true_positives: self.tn,
                predicted_positives: self.tn + self.fn_,
                actual_positives: self.tn + self.fp,
            },
            ClassCounts {
                true_positives: self.tp,
                predicted_positives: self.tp + self.fp,
                actual_positives: self.tp + self.fn_,
            },
        ]
    }

    pub fn support(&self) -> ClassWeights {
        ClassWeights([(self.tn + self.fp) as f64, (self.tp + self.fn_) as f64])
    }

    /// `tp / (tp + fn)`.
    pub fn recall_tpr(&self) -> Checked {
        let mut w = 0;
        let value = ratio(self.tp, self.tp + self.fn_, &mut w);
        Checked { value, warnings: w }
    }

    /// `tn / (tn + fp)`.
    pub fn specificity_tnr(&self) -> Checked {
        let mut w = 0;
        let value = ratio(self.tn, self.tn + self.fp, &mut w);
        Checked { value, warnings: w }
    }
}

fn weighted_mean(values: [f64; 2], weights: &ClassWeights) -> f64 {
    let total: f64 = weights.0.iter().sum();
    values.iter().zip(&weights.0).map(|(v, w)| v * w).sum::<f64>() / total
}

fn ensure_nonempty(counts: &[ClassCounts; 2], weights: &ClassWeights) -> Result<(), MetricError> {
    let n: usize = counts.iter().map(|c| c.predicted_positives).sum();
    if n == 0 || weights.0.iter().sum::<f64>() <= 0.0 {
        Err(MetricError::Empty)
    } else {
        Ok(())
    }
}

/// Support-weighted mean of per-class precision.
pub fn weighted_precision(counts: &[ClassCounts; 2], weights: &ClassWeights) -> Result<Checked, MetricError> {
    ensure_nonempty(counts, weights)?;
    let mut warnings = 0;
    let per = counts.map(|c| ratio(c.true_positives, c.predicted_positives, &mut warnings));
    Ok(Checked {
        value: weighted_mean(per, weights),
        warnings,
    })
}

/// Support-weighted mean of per-class recall.
pub fn weighted_recall(counts: &[ClassCounts; 2], weights: &ClassWeights) -> Result<Checked, MetricError> {
    ensure_nonempty(counts, weights)?;
    let mut warnings = 0;
    let per = counts.map(|c| ratio(c.true_positives, c.actual_positives, &mut warnings));
    Ok(Checked {
        value: weighted_mean(per, weights),
        warnings,
    })
}

/// Harmonic combination of the weighted aggregates; `0` (with a warning)
/// when both are zero.
pub fn weighted_f1(precision_w: f64, recall_w: f64) -> Checked {
    if precision_w + recall_w == 0.0 {
        return Checked {
            value: 0.0,
            warnings: 1,
        };
    }
    Checked {
        value: 2.0 * precision_w * recall_w / (precision_w + recall_w),
        warnings: 0,
    }
}

/// Per-class F1, then support-weighted mean (the convention most reporting
/// tools call "weighted F1").
pub fn weighted_f1_per_class(counts: &[ClassCounts; 2], weights: &ClassWeights) -> Result<Checked, MetricError> {
    ensure_nonempty(counts, weights)?;
    let mut warnings = 0;
    let per = counts.map(|c| {
        let p = ratio(c.true_positives, c.predicted_positives, &mut warnings);
        let r = ratio(c.true_positives, c.actual_positives, &mut warnings);
        let f = weighted_f1(p, r);
        warnings += f.warnings;
        f.value
    });
    Ok(Checked {
        value: weighted_mean(per, weights),
        warnings,
    })
}

pub fn g_mean(recall_tpr: f64, specificity_tnr: f64) -> f64 {
    (recall_tpr * specificity_tnr).sqrt()
}

/// Mann-Whitney form of the ROC AUC: `(R+ - n+(n+ + 1)/2) / (n+ n-)` with
/// mid-ranks for ties, i.e. the probability that a random positive
/// outranks a random negative, ties counted one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            truth: labels.len(),
            other: scores.len(),
        });
    }
    check_binary(labels)?;
    if let Some(&s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(MetricError::NonFiniteScore(s));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum_pos += mid * pos_in_group as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// One cell group of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub recall_tpr: f64,
    pub specificity_tnr: f64,
    pub precision_w: f64,
    pub recall_w: f64,
    /// Harmonic mean of `precision_w` and `recall_w`; the headline F1.
    pub f1_w: f64,
    /// Per-class F1 weighted by support, reported alongside.
    pub f1_w_per_class: f64,
    pub g_mean: f64,
    pub auc: f64,
    pub confusion: ConfusionCounts,
    pub warnings: u32,
}

impl MetricBlock {
    pub fn compute(truth: &[u8], preds: &[u8], scores: &[f64]) -> Result<Self, MetricError> {
        let c = confusion(truth, preds)?;
        let per = c.per_class();
        let weights = c.support();
        let tpr = c.recall_tpr();
        let tnr = c.specificity_tnr();
        let p = weighted_precision(&per, &weights)?;
        let r = weighted_recall(&per, &weights)?;
        let f1 = weighted_f1(p.value, r.value);
        let f1_alt = weighted_f1_per_class(&per, &weights)?;
        let auc = roc_auc(scores, truth)?;
        Ok(Self {
            recall_tpr: tpr.value,
            specificity_tnr: tnr.value,
            precision_w: p.value,
            recall_w: r.value,
            f1_w: f1.value,
            f1_w_per_class: f1_alt.value,
            g_mean: g_mean(tpr.value, tnr.value),
            auc,
            confusion: c,
            warnings: tpr.warnings + tnr.warnings + p.warnings + r.warnings + f1.warnings + f1_alt.warnings,
        })
    }
}

/// Headline weighted F1 of a label vector against the truth.
pub fn weighted_f1_score(truth: &[u8], preds: &[u8]) -> Result<f64, MetricError> {
    let c = confusion(truth, preds)?;
    let per = c.per_class();
    let w = c.support();
    let p = weighted_precision(&per, &w)?;
    let r = weighted_recall(&per, &w)?;
    Ok(weighted_f1(p.value, r.value).value)
}
