//! Feature statistics fitted on a training portion only.

use serde::Serialize;
use thiserror::Error;

use crate::corpus::Document;
use crate::selector::{anova_f, select_k_best, variance_filter, FeatureScores, SelectError, SelectionMask};
use crate::vectorizer::{FeatureMatrix, TfidfModel, VectorizeError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Vectorize(#[from] VectorizeError),
    #[error(transparent)]
    Select(#[from] SelectError),
}

/// TF-IDF model, variance mask and ANOVA scores learned from one set of
/// training documents. Nothing here ever sees held-out rows.
#[derive(Debug, Clone)]
pub struct TrainingStats {
    pub tfidf: TfidfModel,
    /// Over TF-IDF columns.
    pub variance_mask: SelectionMask,
    /// Over the variance-filtered columns.
    pub scores: FeatureScores,
}

/// Serializable snapshot of [`TrainingStats`] plus the top-k masks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsAudit {
    pub terms: Vec<String>,
    pub idf: Vec<f64>,
    pub variance_kept: Vec<usize>,
    pub scores: Vec<f64>,
    /// `(k, kept TF-IDF columns)` for each k that fits.
    pub k_masks: Vec<(usize, Vec<usize>)>,
}

impl TrainingStats {
    pub fn fit(train_docs: &[Document], min_df: usize, variance_threshold: f64) -> Result<Self, PipelineError> {
        let tfidf = TfidfModel::fit(train_docs, min_df)?;
        let full = tfidf.transform(train_docs);
        let variance_mask = variance_filter(&full, variance_threshold)?;
        let scores = anova_f(&variance_mask.apply(&full))?;
        Ok(Self {
            tfidf,
            variance_mask,
            scores,
        })
    }

    /// Number of columns surviving the variance filter.
    pub fn width(&self) -> usize {
        self.variance_mask.len()
    }

    /// TF-IDF features restricted to the variance-filtered columns.
    pub fn features(&self, docs: &[Document]) -> FeatureMatrix {
        self.variance_mask.apply(&self.tfidf.transform(docs))
    }

    /// Top-k mask over the variance-filtered columns.
    pub fn kbest(&self, k: usize) -> Result<SelectionMask, PipelineError> {
        Ok(select_k_best(&self.scores, k)?)
    }

    pub fn select(&self, docs: &[Document], k: usize) -> Result<FeatureMatrix, PipelineError> {
        Ok(self.kbest(k)?.apply(&self.features(docs)))
    }

    pub fn audit(&self, k_values: &[usize]) -> StatsAudit {
        StatsAudit {
            terms: self.tfidf.terms().to_vec(),
            idf: self.tfidf.idf().to_vec(),
            variance_kept: self.variance_mask.kept.clone(),
            scores: self.scores.scores.clone(),
            k_masks: k_values
                .iter()
                .filter_map(|&k| self.kbest(k).ok().map(|m| (k, self.variance_mask.compose(&m).kept)))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(tokens: &[&str], label: u8) -> Document {
        Document {
            id: String::new(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            label,
        }
    }

    #[test]
    fn stats_ignore_documents_they_were_not_fitted_on() {
        let train = [
            doc(&["juicy", "cup"], 1),
            doc(&["juicy", "round", "cup"], 1),
            doc(&["flat", "cup"], 0),
            doc(&["flat", "thin", "cup"], 0),
        ];
        let s = TrainingStats::fit(&train, 1, 0.0).unwrap();
        assert_eq!(s.tfidf.terms(), ["cup", "flat", "juicy", "round", "thin"]);
        let held_out = [doc(&["unseen", "juicy"], 1)];
        let m = s.select(&held_out, 2).unwrap();
        assert_eq!(m.n_cols(), 2);
        assert_eq!(m.feature_names, ["flat", "juicy"]);
        assert_eq!(m.labels, vec![1]);
        let a = s.audit(&[2, 99]);
        assert_eq!(a.k_masks.len(), 1);
    }
}
