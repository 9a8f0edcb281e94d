//! TF-IDF fitting and the dense feature matrix shared by every later stage.
//!
//! TF is the raw term count, IDF is the smoothed `ln((1 + n) / (1 + df)) + 1`
//! and every row is L2-normalized. Columns are the fitted vocabulary in
//! lexicographic order; transforming any document set yields exactly those
//! columns, with out-of-vocabulary tokens ignored.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;

#[derive(Debug, Error, PartialEq)]
pub enum VectorizeError {
    #[error("no training document contains a token")]
    NoTokens,
    #[error("no term reaches min_df = {0}")]
    EmptyVocabulary(usize),
    #[error("min_df must be at least 1")]
    ZeroMinDf,
    #[error("inconsistent model export: {0}")]
    BadExport(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    terms: Vec<String>,
    vocabulary: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    n_docs: usize,
    idf: Vec<f64>,
}

/// JSON export of a fitted model: terms in column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfExport {
    pub terms: Vec<String>,
    pub doc_freq: Vec<usize>,
    pub n_docs: usize,
}

pub fn smoothed_idf(n_docs: usize, doc_freq: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + doc_freq as f64)).ln() + 1.0
}

impl TfidfModel {
    pub fn fit(train_docs: &[Document], min_df: usize) -> Result<Self, VectorizeError> {
        if min_df == 0 {
            return Err(VectorizeError::ZeroMinDf);
        }
        if !train_docs.iter().any(|d| !d.tokens.is_empty()) {
            return Err(VectorizeError::NoTokens);
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in train_docs {
            let mut seen: Vec<&str> = doc.tokens.iter().map(String::as_str).collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_default() += 1;
            }
        }
        let (terms, doc_freq): (Vec<String>, Vec<usize>) = df
            .into_iter()
            .filter(|&(_, c)| c >= min_df)
            .map(|(t, c)| (t.to_string(), c))
            .unzip();
        if terms.is_empty() {
            return Err(VectorizeError::EmptyVocabulary(min_df));
        }
        Ok(Self::from_parts(terms, doc_freq, train_docs.len()))
    }

    fn from_parts(terms: Vec<String>, doc_freq: Vec<usize>, n_docs: usize) -> Self {
        let vocabulary = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let idf = doc_freq.iter().map(|&d| smoothed_idf(n_docs, d)).collect();
        Self {
            terms,
            vocabulary,
            doc_freq,
            n_docs,
            idf,
        }
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.vocabulary.get(term).copied()
    }

    pub fn doc_freq(&self) -> &[usize] {
        &self.doc_freq
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn n_features(&self) -> usize {
        self.terms.len()
    }

    pub fn transform_tokens(&self, tokens: &[String]) -> Vec<f64> {
        let mut row = vec![0.0; self.terms.len()];
        for t in tokens {
            if let Some(&j) = self.vocabulary.get(t) {
                row[j] += 1.0;
            }
        }
        for (v, idf) in row.iter_mut().zip(&self.idf) {
            *v *= idf;
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
        row
    }

    pub fn transform(&self, docs: &[Document]) -> FeatureMatrix {
        FeatureMatrix {
            rows: docs.iter().map(|d| self.transform_tokens(&d.tokens)).collect(),
            labels: docs.iter().map(|d| d.label).collect(),
            feature_names: self.terms.clone(),
        }
    }

    pub fn export(&self) -> TfidfExport {
        TfidfExport {
            terms: self.terms.clone(),
            doc_freq: self.doc_freq.clone(),
            n_docs: self.n_docs,
        }
    }

    pub fn from_export(export: TfidfExport) -> Result<Self, VectorizeError> {
        let TfidfExport { terms, doc_freq, n_docs } = export;
        if terms.len() != doc_freq.len() {
            return Err(VectorizeError::BadExport("terms and doc_freq differ in length".into()));
        }
        if terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(VectorizeError::BadExport("terms must be strictly sorted".into()));
        }
        if doc_freq.iter().any(|&d| d == 0 || d > n_docs) {
            return Err(VectorizeError::BadExport("doc_freq outside 1..=n_docs".into()));
        }
        if terms.is_empty() {
            return Err(VectorizeError::BadExport("empty vocabulary".into()));
        }
        Ok(Self::from_parts(terms, doc_freq, n_docs))
    }
}

/// Dense `n_samples x n_features` matrix with row labels and column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<u8>, feature_names: Vec<String>) -> Self {
        debug_assert_eq!(rows.len(), labels.len());
        debug_assert!(rows.iter().all(|r| r.len() == feature_names.len()));
        Self {
            rows,
            labels,
            feature_names,
        }
    }

    /// Matrix with generated column names `f0, f1, ...`.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Self {
        let width = rows.first().map_or(0, Vec::len);
        let names = (0..width).map(|j| format!("f{j}")).collect();
        Self::new(rows, labels, names)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[j])
    }

    /// Keeps the given columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: self
                .rows
                .iter()
                .map(|r| columns.iter().map(|&j| r[j]).collect())
                .collect(),
            labels: self.labels.clone(),
            feature_names: columns.iter().map(|&j| self.feature_names[j].clone()).collect(),
        }
    }

    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(tokens: &[&str]) -> Document {
        Document {
            id: String::new(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            label: 0,
        }
    }

    #[test]
    fn fit_two_doc_example() {
        let docs = [doc(&["a", "b"]), doc(&["b", "c"])];
        let m = TfidfModel::fit(&docs, 1).unwrap();
        assert_eq!(m.terms(), ["a", "b", "c"]);
        assert_eq!(m.column("b"), Some(1));
        assert_eq!(m.idf()[1], 1.0);
        assert!((m.idf()[0] - (1.5f64.ln() + 1.0)).abs() < 1e-15);
        assert!((m.idf()[0] - 1.4055).abs() < 1e-4);
    }

    #[test]
    fn single_doc_idf_is_one() {
        let m = TfidfModel::fit(&[doc(&["x"])], 1).unwrap();
        assert_eq!(m.idf(), [1.0]);
    }

    #[test]
    fn fit_errors() {
        let docs = [doc(&["a", "b"]), doc(&["b", "c"])];
        assert_eq!(TfidfModel::fit(&docs, 3), Err(VectorizeError::EmptyVocabulary(3)));
        assert_eq!(TfidfModel::fit(&[doc(&[])], 1), Err(VectorizeError::NoTokens));
        assert_eq!(TfidfModel::fit(&docs, 0), Err(VectorizeError::ZeroMinDf));
    }

    #[test]
    fn min_df_prunes() {
        let docs = [doc(&["a", "b"]), doc(&["b", "c"])];
        let m = TfidfModel::fit(&docs, 2).unwrap();
        assert_eq!(m.terms(), ["b"]);
        assert_eq!(m.n_docs(), 2);
    }

    #[test]
    fn transform_examples() {
        let docs = [doc(&["a", "b"]), doc(&["b", "c"])];
        let m = TfidfModel::fit(&docs, 1).unwrap();
        let x = m.transform(&[doc(&["b", "b"]), doc(&["zzz"]), doc(&[])]);
        assert_eq!(x.rows[0], vec![0.0, 1.0, 0.0]);
        assert_eq!(x.rows[1], vec![0.0; 3]);
        assert_eq!(x.rows[2], vec![0.0; 3]);
        assert_eq!(x.n_cols(), 3);
    }

    #[test]
    fn export_round_trip() {
        let docs = [doc(&["a", "b"]), doc(&["b", "c"]), doc(&["c"])];
        let m = TfidfModel::fit(&docs, 1).unwrap();
        let json = serde_json::to_string(&m.export()).unwrap();
        let back = TfidfModel::from_export(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, m);
        let mut bad = m.export();
        bad.doc_freq[0] = 0;
        assert!(TfidfModel::from_export(bad).is_err());
    }

    fn token_lists() -> impl Strategy<Value = Vec<Vec<String>>> {
        prop::collection::vec(prop::collection::vec("[a-e]", 0..8), 1..6)
    }

    proptest! {
        #[test]
        fn rows_are_unit_or_zero(lists in token_lists()) {
            let docs: Vec<Document> = lists.iter().map(|l| Document { id: String::new(), tokens: l.clone(), label: 0 }).collect();
            if let Ok(m) = TfidfModel::fit(&docs, 1) {
                let x = m.transform(&docs);
                for r in &x.rows {
                    prop_assert_eq!(r.len(), m.n_features());
                    prop_assert!(r.iter().all(|&v| v >= 0.0));
                    let n: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                    prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-12);
                }
                for (t, &df) in m.terms().iter().zip(m.doc_freq()) {
                    prop_assert!(df >= 1);
                    prop_assert_eq!(m.column(t).map(|j| m.terms()[j].clone()), Some(t.clone()));
                }
                prop_assert!(m.idf().iter().all(|&w| w > 0.0));
            }
        }

        #[test]
        fn scaling_and_reordering_leave_rows_unchanged(lists in token_lists(), factor in 2usize..4, seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let docs: Vec<Document> = lists.iter().map(|l| Document { id: String::new(), tokens: l.clone(), label: 0 }).collect();
            if let Ok(m) = TfidfModel::fit(&docs, 1) {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                for l in &lists {
                    let base = m.transform_tokens(l);
                    let scaled: Vec<String> = l.iter().cloned().cycle().take(l.len() * factor).collect();
                    let mut shuffled = l.clone();
                    shuffled.shuffle(&mut rng);
                    for other in [m.transform_tokens(&scaled), m.transform_tokens(&shuffled)] {
                        for (a, b) in base.iter().zip(&other) {
                            prop_assert!((a - b).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }
}
