use std::collections::BTreeSet;

use super::{clean_text, tokenize, CorpusError};

const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// SHA-256 of the shipped stopword file.
pub const BUNDLED_STOPWORDS_SHA256: &str =
    "019f104ba2ed07436d05f9cdd3383034ad66014edc27fc651f837e1a038b6451";

/// Lowercase alphabetic stopwords.
///
/// File entries go through the same cleaning as review text, so a
/// contraction such as `don't` contributes `don` and `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordList {
    words: BTreeSet<String>,
}

impl StopwordList {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_STOPWORDS).expect("bundled stopword list is well formed")
    }

    pub fn bundled_source() -> &'static str {
        BUNDLED_STOPWORDS
    }

    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut words = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let entry = line.trim();
            if entry.is_empty() || entry.starts_with('#') {
                continue;
            }
            let parts = tokenize(&clean_text(entry));
            if parts.is_empty() {
                return Err(CorpusError::Table {
                    table: "stopword",
                    line: i + 1,
                    message: format!("entry `{entry}` has no letters"),
                });
            }
            words.extend(parts);
        }
        Ok(Self { words })
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}
