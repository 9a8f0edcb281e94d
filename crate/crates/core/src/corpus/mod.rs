//! Review ingestion and text preprocessing.
//!
//! The pipeline for a single review is: clean (non-letters to spaces,
//! lowercase) -> whitespace tokenize -> lemmatize -> stopword filter. The
//! rating is binarized against a caller-supplied threshold.

mod lemma;
mod stopwords;

pub use lemma::{LemmaTable, Repair, SuffixRule};
pub use stopwords::{StopwordList, BUNDLED_STOPWORDS_SHA256};

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV at row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: rating `{value}` is not a finite number")]
    BadRating {
        row: usize,
        column: String,
        value: String,
    },
    #[error("rating threshold must be finite, got {0}")]
    BadThreshold(f64),
    #[error("line {line} of {table}: {message}")]
    Table {
        table: &'static str,
        line: usize,
        message: String,
    },
}

/// One record as found in the source file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawReview {
    pub id: String,
    pub text: String,
    pub rating: f64,
}

/// A preprocessed review: lemma tokens plus the binary class
/// (0 = average, 1 = outstanding).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: u8,
}

/// Summary of a preprocessing pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessStats {
    pub n_docs: usize,
    pub n_positive: usize,
    /// Ids of documents left with no tokens (e.g. all stopwords). They are
    /// kept so row alignment with the input file holds.
    pub empty_ids: Vec<String>,
}

/// Reads a headered CSV file. Data rows are numbered from 1 (the header is
/// not counted) and that number becomes the review id.
pub fn load_corpus(
    path: impl AsRef<Path>,
    text_column: &str,
    rating_column: &str,
) -> Result<Vec<RawReview>, CorpusError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_corpus(file, text_column, rating_column)
}

/// Same as [`load_corpus`] over any reader.
pub fn read_corpus<R: std::io::Read>(
    reader: R,
    text_column: &str,
    rating_column: &str,
) -> Result<Vec<RawReview>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CorpusError::Csv {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
    };
    let text_idx = find(text_column)?;
    let rating_idx = find(rating_column)?;

    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CorpusError::Csv {
            row,
            message: e.to_string(),
        })?;
        let text = record.get(text_idx).unwrap_or_default().to_string();
        let raw_rating = record.get(rating_idx).unwrap_or_default();
        let rating = raw_rating
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|r| r.is_finite())
            .ok_or_else(|| CorpusError::BadRating {
                row,
                column: rating_column.to_string(),
                value: raw_rating.to_string(),
            })?;
        out.push(RawReview {
            id: row.to_string(),
            text,
            rating,
        });
    }
    Ok(out)
}

/// Replaces every maximal run of non-ASCII-letter characters with a single
/// space, lowercases, and trims the ends.
pub fn clean_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars() {
        if ch.is_ascii_alphabetic() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(ch.to_ascii_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

pub fn lemmatize(token: &str, table: &LemmaTable) -> String {
    table.lemmatize(token)
}

/// Rating at or above `threshold` is class 1.
pub fn binarize(rating: f64, threshold: f64) -> u8 {
    u8::from(rating >= threshold)
}

pub fn preprocess(
    review: &RawReview,
    stopwords: &StopwordList,
    table: &LemmaTable,
    threshold: f64,
) -> Result<Document, CorpusError> {
    if !threshold.is_finite() {
        return Err(CorpusError::BadThreshold(threshold));
    }
    let cleaned = clean_text(&review.text);
    let tokens = tokenize(&cleaned)
        .iter()
        .map(|t| table.lemmatize(t))
        .filter(|lemma| !stopwords.contains(lemma))
        .collect();
    Ok(Document {
        id: review.id.clone(),
        tokens,
        label: binarize(review.rating, threshold),
    })
}

/// Preprocesses every review, in parallel, preserving input order.
pub fn preprocess_all(
    reviews: &[RawReview],
    stopwords: &StopwordList,
    table: &LemmaTable,
    threshold: f64,
) -> Result<(Vec<Document>, PreprocessStats), CorpusError> {
    let docs = reviews
        .par_iter()
        .map(|r| preprocess(r, stopwords, table, threshold))
        .collect::<Result<Vec<_>, _>>()?;
    let stats = PreprocessStats {
        n_docs: docs.len(),
        n_positive: docs.iter().filter(|d| d.label == 1).count(),
        empty_ids: docs
            .iter()
            .filter(|d| d.tokens.is_empty())
            .map(|d| d.id.clone())
            .collect(),
    };
    Ok((docs, stats))
}
