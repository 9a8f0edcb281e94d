//! Review-text rating classification: preprocessing, TF-IDF features,
//! univariate selection, six classifier families, grid search and metrics.

pub mod corpus;
pub mod experiment;
pub mod learners;
pub mod metrics;
pub mod seed;
pub mod selector;
pub mod tuner;
pub mod vectorizer;
