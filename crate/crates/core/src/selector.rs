//! Column selection: variance filtering, ANOVA F scoring with top-k
//! selection, and the train/validation-gap sweep over attribute counts.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learners::{HyperParams, LearnError, Model};
use crate::metrics::{weighted_f1_score, MetricError};
use crate::vectorizer::FeatureMatrix;

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("variance threshold must be finite and non-negative, got {0}")]
    BadThreshold(f64),
    #[error("no column has variance above {0}")]
    NoColumnsLeft(f64),
    #[error("ANOVA scoring needs both classes present")]
    SingleClass,
    #[error("ANOVA scoring needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("k = {k} is outside 1..={n_features}")]
    KOutOfRange { k: usize, n_features: usize },
    #[error("sweep candidates must be non-empty and strictly ascending")]
    BadCandidates,
    #[error("no sweep candidate fits within {0} features")]
    NoUsableCandidate(usize),
    #[error("gap limit must lie in (0, 1), got {0}")]
    BadGapLimit(f64),
    #[error("probe model failed: {0}")]
    Probe(#[from] LearnError),
    #[error("probe scoring failed: {0}")]
    Metric(#[from] MetricError),
    #[error("writing export: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Identity,
    VarianceFilter,
    KBest,
    Composed,
}

/// Retained column indices, strictly ascending, of a matrix `width` wide.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionMask {
    pub kept: Vec<usize>,
    pub origin: Origin,
    pub width: usize,
}

impl SelectionMask {
    pub fn identity(width: usize) -> Self {
        Self {
            kept: (0..width).collect(),
            origin: Origin::Identity,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn apply(&self, matrix: &FeatureMatrix) -> FeatureMatrix {
        matrix.select_columns(&self.kept)
    }

    /// Mask over the original columns for `inner`, which indexes the columns
    /// this mask keeps.
    pub fn compose(&self, inner: &SelectionMask) -> SelectionMask {
        SelectionMask {
            kept: inner.kept.iter().map(|&j| self.kept[j]).collect(),
            origin: Origin::Composed,
            width: self.width,
        }
    }
}

/// Population variance (divides by n).
pub fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

fn column_vec(matrix: &FeatureMatrix, j: usize) -> Vec<f64> {
    matrix.column(j).collect()
}

/// Keeps the columns whose population variance exceeds `threshold`.
pub fn variance_filter(matrix: &FeatureMatrix, threshold: f64) -> Result<SelectionMask, SelectError> {
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(SelectError::BadThreshold(threshold));
    }
    let kept: Vec<usize> = (0..matrix.n_cols())
        .into_par_iter()
        .filter(|&j| {
            let col = column_vec(matrix, j);
            let constant = col.windows(2).all(|w| w[0] == w[1]);
            !constant && population_variance(&col) > threshold
        })
        .collect();
    if kept.is_empty() {
        return Err(SelectError::NoColumnsLeft(threshold));
    }
    Ok(SelectionMask {
        kept,
        origin: Origin::VarianceFilter,
        width: matrix.n_cols(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScores {
    /// ANOVA F per column; `f64::INFINITY` marks perfect separation.
    pub scores: Vec<f64>,
    pub feature_names: Vec<String>,
    /// Per-column mean within class 0 and class 1.
    pub class_means: Vec<[f64; 2]>,
}

impl FeatureScores {
    /// Column indices ordered by score descending, ties by ascending index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        order
    }

    /// CSV of `term,score,class0_mean,class1_mean`, highest score first.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SelectError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["term", "score", "class0_mean", "class1_mean"])
            .map_err(std::io::Error::from)?;
        for j in self.ranking() {
            let [m0, m1] = self.class_means[j];
            w.write_record([
                self.feature_names[j].clone(),
                format_score(self.scores[j]),
                format!("{m0:.6}"),
                format!("{m1:.6}"),
            ])
            .map_err(std::io::Error::from)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn format_score(s: f64) -> String {
    if s.is_infinite() {
        "inf".to_string()
    } else {
        format!("{s:.6}")
    }
}

/// One-way ANOVA F statistic of each column against the binary labels.
pub fn anova_f(matrix: &FeatureMatrix) -> Result<FeatureScores, SelectError> {
    let labels = &matrix.labels;
    let n = labels.len();
    let n1 = labels.iter().filter(|&&y| y == 1).count();
    let n0 = n - n1;
    if n0 == 0 || n1 == 0 {
        return Err(SelectError::SingleClass);
    }
    if n < 3 {
        return Err(SelectError::TooFewSamples(n));
    }
    let (scores, class_means): (Vec<f64>, Vec<[f64; 2]>) = (0..matrix.n_cols())
        .into_par_iter()
        .map(|j| {
            let col = column_vec(matrix, j);
            let mut sums = [0.0; 2];
            for (x, &y) in col.iter().zip(labels) {
                sums[y as usize] += x;
            }
            let means = [sums[0] / n0 as f64, sums[1] / n1 as f64];
            if col.windows(2).all(|w| w[0] == w[1]) {
                return (0.0, means);
            }
            let grand = col.iter().sum::<f64>() / n as f64;
            let msb = n0 as f64 * (means[0] - grand).powi(2) + n1 as f64 * (means[1] - grand).powi(2);
            let ssw: f64 = col.iter().zip(labels).map(|(x, &y)| (x - means[y as usize]).powi(2)).sum();
            let msw = ssw / (n - 2) as f64;
            let f = if msw == 0.0 {
                if msb > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            } else {
                msb / msw
            };
            (f, means)
        })
        .unzip();
    Ok(FeatureScores {
        scores,
        feature_names: matrix.feature_names.clone(),
        class_means,
    })
}

/// The `k` best-scoring columns, returned in ascending index order.
pub fn select_k_best(scores: &FeatureScores, k: usize) -> Result<SelectionMask, SelectError> {
    let width = scores.scores.len();
    if k == 0 || k > width {
        return Err(SelectError::KOutOfRange { k, n_features: width });
    }
    let mut kept: Vec<usize> = scores.ranking().into_iter().take(k).collect();
    kept.sort_unstable();
    Ok(SelectionMask {
        kept,
        origin: Origin::KBest,
        width,
    })
}

/// Model used to score each candidate attribute count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub params: HyperParams,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub candidate_counts: Vec<usize>,
    pub train_scores: Vec<f64>,
    pub val_scores: Vec<f64>,
    pub chosen_count: usize,
    pub gap_limit: f64,
    /// Whether `chosen_count` actually satisfies the gap limit.
    pub within_limit: bool,
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SelectError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["count", "train_score", "val_score"])
            .map_err(std::io::Error::from)?;
        for i in 0..self.candidate_counts.len() {
            w.write_record([
                self.candidate_counts[i].to_string(),
                format!("{:.6}", self.train_scores[i]),
                format!("{:.6}", self.val_scores[i]),
            ])
            .map_err(std::io::Error::from)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Picks the candidate with the best validation score among those whose
/// train/validation gap is within `gap_limit`; if none is, the one with the
/// smallest gap. Earlier candidates win ties. Returns (index, within_limit).
pub fn choose_candidate(train: &[f64], val: &[f64], gap_limit: f64) -> (usize, bool) {
    let gap = |i: usize| (train[i] - val[i]).abs();
    let mut best: Option<usize> = None;
    for i in 0..val.len() {
        if gap(i) <= gap_limit && best.is_none_or(|b| val[i] > val[b]) {
            best = Some(i);
        }
    }
    if let Some(b) = best {
        return (b, true);
    }
    let mut b = 0;
    for i in 1..val.len() {
        if gap(i) < gap(b) {
            b = i;
        }
    }
    (b, false)
}

/// Scores the probe on the top-`c` ANOVA columns of `train` for each
/// candidate `c`. Candidates wider than `train` are dropped.
pub fn sweep_attribute_count(
    train: &FeatureMatrix,
    val: &FeatureMatrix,
    candidates: &[usize],
    gap_limit: f64,
    probe: &Probe,
) -> Result<SweepReport, SelectError> {
    if candidates.is_empty() || candidates.windows(2).any(|w| w[0] >= w[1]) || candidates[0] == 0 {
        return Err(SelectError::BadCandidates);
    }
    if !(gap_limit > 0.0 && gap_limit < 1.0) {
        return Err(SelectError::BadGapLimit(gap_limit));
    }
    let usable: Vec<usize> = candidates.iter().copied().filter(|&c| c <= train.n_cols()).collect();
    if usable.is_empty() {
        return Err(SelectError::NoUsableCandidate(train.n_cols()));
    }
    let scores = anova_f(train)?;
    let results: Vec<(f64, f64)> = usable
        .par_iter()
        .map(|&c| {
            let mask = select_k_best(&scores, c)?;
            let tr = mask.apply(train);
            let va = mask.apply(val);
            let model = Model::fit(&tr, &probe.params, probe.seed)?;
            let t = weighted_f1_score(&tr.labels, &model.predict(&tr)?)?;
            let v = weighted_f1_score(&va.labels, &model.predict(&va)?)?;
            Ok((t, v))
        })
        .collect::<Result<_, SelectError>>()?;
    let (train_scores, val_scores): (Vec<f64>, Vec<f64>) = results.into_iter().unzip();
    let (idx, within_limit) = choose_candidate(&train_scores, &val_scores, gap_limit);
    Ok(SweepReport {
        chosen_count: usable[idx],
        candidate_counts: usable,
        train_scores,
        val_scores,
        gap_limit,
        within_limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(cols: &[&[f64]], labels: &[u8]) -> FeatureMatrix {
        let n = labels.len();
        let rows = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        FeatureMatrix::from_rows(rows, labels.to_vec())
    }

    #[test]
    fn variance_filter_examples() {
        let m = matrix(&[&[1.0, 1.0, 1.0, 1.0], &[0.0, 0.0, 1.0, 1.0]], &[0, 0, 1, 1]);
        assert_eq!(variance_filter(&m, 0.0).unwrap().kept, vec![1]);
        assert_eq!(variance_filter(&m, 0.2).unwrap().kept, vec![1]);
        assert!(matches!(variance_filter(&m, 0.25), Err(SelectError::NoColumnsLeft(_))));
        assert!(variance_filter(&m, -1.0).is_err());
    }

    #[test]
    fn anova_examples() {
        let m = matrix(
            &[&[0.0, 1.0, 2.0, 3.0], &[5.0, 5.0, 5.0, 5.0], &[0.0, 0.0, 1.0, 1.0], &[1.0, 2.0, 1.0, 2.0]],
            &[0, 0, 1, 1],
        );
        let s = anova_f(&m).unwrap();
        assert_eq!(s.scores[0], 8.0);
        assert_eq!(s.scores[1], 0.0);
        assert_eq!(s.scores[2], f64::INFINITY);
        assert_eq!(s.scores[3], 0.0);
        assert_eq!(s.class_means[0], [0.5, 2.5]);
        assert!(matches!(anova_f(&matrix(&[&[1.0, 2.0]], &[1, 1])), Err(SelectError::SingleClass)));
    }

    fn scores(v: &[f64]) -> FeatureScores {
        FeatureScores {
            scores: v.to_vec(),
            feature_names: (0..v.len()).map(|j| format!("t{j}")).collect(),
            class_means: vec![[0.0, 0.0]; v.len()],
        }
    }

    #[test]
    fn k_best_examples() {
        assert_eq!(select_k_best(&scores(&[3.0, 1.0, 2.0]), 2).unwrap().kept, vec![0, 2]);
        assert_eq!(select_k_best(&scores(&[1.0, 1.0, 1.0]), 2).unwrap().kept, vec![0, 1]);
        assert_eq!(select_k_best(&scores(&[1.0, 2.0]), 2).unwrap().kept, vec![0, 1]);
        assert_eq!(select_k_best(&scores(&[1.0, f64::INFINITY, 9.0, f64::INFINITY]), 2).unwrap().kept, vec![1, 3]);
        assert!(select_k_best(&scores(&[1.0]), 0).is_err());
        assert!(select_k_best(&scores(&[1.0]), 2).is_err());
    }

    #[test]
    fn compose_maps_back_to_original_columns() {
        let outer = SelectionMask {
            kept: vec![1, 4, 6, 9],
            origin: Origin::VarianceFilter,
            width: 10,
        };
        let inner = SelectionMask {
            kept: vec![0, 2],
            origin: Origin::KBest,
            width: 4,
        };
        assert_eq!(outer.compose(&inner).kept, vec![1, 6]);
    }

    #[test]
    fn candidate_choice_rule() {
        // only the second candidate is within the gap
        assert_eq!(choose_candidate(&[1.0, 0.9, 1.0], &[0.8, 0.88, 0.9], 0.05), (1, true));
        // best validation among qualifying, first wins ties
        assert_eq!(choose_candidate(&[0.9, 0.9, 0.9], &[0.88, 0.89, 0.89], 0.05), (1, true));
        // none qualify: smallest gap
        assert_eq!(choose_candidate(&[1.0, 1.0], &[0.5, 0.7], 0.05), (1, false));
    }

    #[test]
    fn feature_score_csv_is_sorted_descending() {
        let mut buf = Vec::new();
        scores(&[1.0, f64::INFINITY, 3.0]).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let terms: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(terms, ["t1", "t2", "t0"]);
    }

    proptest! {
        #[test]
        fn k_best_is_nested(v in proptest::collection::vec(0u8..5, 2..20)) {
            let s = scores(&v.iter().map(|&x| f64::from(x)).collect::<Vec<_>>());
            for k in 1..v.len() {
                let a = select_k_best(&s, k).unwrap().kept;
                let b = select_k_best(&s, k + 1).unwrap().kept;
                prop_assert!(a.iter().all(|j| b.contains(j)));
            }
        }

        #[test]
        fn anova_is_shift_and_scale_invariant(
            x in proptest::collection::vec(-5.0f64..5.0, 6..20),
            shift in -10.0f64..10.0,
            scale in 0.1f64..10.0,
        ) {
            let labels: Vec<u8> = (0..x.len()).map(|i| (i % 2) as u8).collect();
            let moved: Vec<f64> = x.iter().map(|v| v * scale + shift).collect();
            let a = anova_f(&matrix(&[&x], &labels)).unwrap().scores[0];
            let b = anova_f(&matrix(&[&moved], &labels)).unwrap().scores[0];
            prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0));
        }

        #[test]
        fn filtered_then_selected_never_keeps_a_constant(
            cols in proptest::collection::vec(proptest::collection::vec(0u8..3, 8), 1..8),
        ) {
            let labels: Vec<u8> = (0..8).map(|i| (i % 2) as u8).collect();
            let mut cols: Vec<Vec<f64>> = cols.iter().map(|c| c.iter().map(|&v| f64::from(v)).collect()).collect();
            cols.push(vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 2.0]);
            let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
            let m = matrix(&refs, &labels);
            let vf = variance_filter(&m, 0.0).unwrap();
            let reduced = vf.apply(&m);
            let s = anova_f(&reduced).unwrap();
            let mask = vf.compose(&select_k_best(&s, reduced.n_cols()).unwrap());
            for &j in &mask.kept {
                prop_assert!(population_variance(&cols[j]) > 0.0);
            }
            let applied = mask.apply(&m);
            prop_assert_eq!(&applied.labels, &m.labels);
        }
    }
}
