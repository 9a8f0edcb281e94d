//! End-to-end experiment: ingest, split, featurize, sweep, tune, evaluate.

use serde::Serialize;
use thiserror::Error;

use super::config::{ConfigError, ExperimentConfig};
use super::pipeline::{PipelineError, StatsAudit, TrainingStats};
use crate::corpus::{load_corpus, preprocess_all, CorpusError, Document, LemmaTable, StopwordList};
use crate::learners::{Family, HyperParams, Model};
use crate::metrics::MetricBlock;
use crate::seed::derive_seed;
use crate::selector::{sweep_attribute_count, FeatureScores, Probe, SweepReport};
use crate::tuner::{grid_search_folds, stratified_kfold, train_val_split, CvResult, FoldData, TuneError};

const STREAM_SPLIT: u64 = 0;
const STREAM_FOLDS: u64 = 1;
const STREAM_SWEEP: u64 = 2;
const STREAM_CV: u64 = 3;
const STREAM_REFIT: u64 = 4;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("splitting: {0}")]
    Split(#[from] TuneError),
    #[error("fitting training features: {0}")]
    Features(#[from] PipelineError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusSummary {
    pub n_docs: usize,
    pub n_positive: usize,
    pub n_train: usize,
    pub n_val: usize,
    /// Ids of reviews that had no tokens left after preprocessing.
    pub empty_docs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    pub id: String,
    pub truth: u8,
    pub pred: u8,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Predictions {
    pub train: Vec<PredictionRow>,
    pub val: Vec<PredictionRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub best_params: HyperParams,
    pub cv: CvResult,
    pub selected_terms: Vec<String>,
    pub train: MetricBlock,
    pub val: MetricBlock,
    #[serde(skip)]
    pub predictions: Predictions,
}

impl CellResult {
    /// Training minus validation headline F1.
    pub fn f1_gap(&self) -> f64 {
        self.train.f1_w - self.val.f1_w
    }
}

/// One (k, family) cell of the result tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub k: usize,
    pub family: Family,
    pub result: Option<CellResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub seed: u64,
    pub config_hash: String,
    pub k_values: Vec<usize>,
    pub families: Vec<Family>,
    pub corpus: CorpusSummary,
    pub vocabulary_size: usize,
    pub n_after_variance: usize,
    /// Statistics fitted on the training split, for leakage audits.
    pub training_stats: StatsAudit,
    pub feature_scores: FeatureScores,
    pub sweep: Option<SweepReport>,
    pub sweep_error: Option<String>,
    pub cells: Vec<Cell>,
}

impl ReportBundle {
    pub fn cell(&self, k: usize, family: Family) -> Option<&Cell> {
        self.cells.iter().find(|c| c.k == k && c.family == family)
    }

    pub fn has_failures(&self) -> bool {
        self.sweep_error.is_some() || self.cells.iter().any(|c| c.error.is_some())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }
}

/// Preprocessed documents of a config's input.
pub fn load_documents(cfg: &ExperimentConfig) -> Result<(Vec<Document>, Vec<String>), RunError> {
    let reviews = load_corpus(&cfg.input.path, &cfg.input.text_column, &cfg.input.rating_column)?;
    let (docs, stats) = preprocess_all(&reviews, &StopwordList::bundled(), &LemmaTable::bundled(), cfg.threshold)?;
    Ok((docs, stats.empty_ids))
}

fn pick(docs: &[Document], idx: &[usize]) -> Vec<Document> {
    idx.iter().map(|&i| docs[i].clone()).collect()
}

/// Training and validation documents of the stratified holdout.
pub fn split_documents(cfg: &ExperimentConfig, docs: &[Document]) -> Result<(Vec<Document>, Vec<Document>), RunError> {
    let labels: Vec<u8> = docs.iter().map(|d| d.label).collect();
    let split = train_val_split(&labels, cfg.val_fraction, derive_seed(cfg.seed, &[STREAM_SPLIT]))?;
    Ok((pick(docs, &split.train), pick(docs, &split.val)))
}

/// The attribute-count sweep on the holdout split.
pub fn run_sweep(cfg: &ExperimentConfig, stats: &TrainingStats, train: &[Document], val: &[Document]) -> Result<SweepReport, String> {
    let probe = Probe {
        params: cfg.sweep.probe.clone(),
        seed: derive_seed(cfg.seed, &[STREAM_SWEEP]),
    };
    sweep_attribute_count(
        &stats.features(train),
        &stats.features(val),
        &cfg.sweep.candidates,
        cfg.sweep.gap_limit,
        &probe,
    )
    .map_err(|e| e.to_string())
}

struct FoldStats {
    stats: TrainingStats,
    train: Vec<Document>,
    val: Vec<Document>,
}

fn fold_data(folds: &[FoldStats], k: usize) -> Result<Vec<FoldData>, PipelineError> {
    folds
        .iter()
        .map(|f| {
            Ok(FoldData {
                train: f.stats.select(&f.train, k)?,
                val: f.stats.select(&f.val, k)?,
            })
        })
        .collect()
}

fn prediction_rows(docs: &[Document], preds: &[u8], scores: &[f64]) -> Vec<PredictionRow> {
    docs.iter()
        .zip(preds.iter().zip(scores))
        .map(|(d, (&pred, &score))| PredictionRow {
            id: d.id.clone(),
            truth: d.label,
            pred,
            score,
        })
        .collect()
}

fn run_cell(
    cfg: &ExperimentConfig,
    stats: &TrainingStats,
    train: &[Document],
    val: &[Document],
    folds: &[FoldData],
    k: usize,
    family: Family,
) -> Result<CellResult, String> {
    let fam_index = Family::ALL.iter().position(|&f| f == family).unwrap() as u64;
    let grid = &cfg.grids[&family];
    let cv = grid_search_folds(grid, folds, derive_seed(cfg.seed, &[STREAM_CV, k as u64, fam_index])).map_err(|e| e.to_string())?;
    let tr = stats.select(train, k).map_err(|e| e.to_string())?;
    let va = stats.select(val, k).map_err(|e| e.to_string())?;
    let model = Model::fit(&tr, &cv.best_params, derive_seed(cfg.seed, &[STREAM_REFIT, k as u64, fam_index]))
        .map_err(|e| e.to_string())?;
    let evaluate = |m: &crate::vectorizer::FeatureMatrix, docs: &[Document]| -> Result<(MetricBlock, Vec<PredictionRow>), String> {
        let preds = model.predict(m).map_err(|e| e.to_string())?;
        let scores = model.predict_proba(m).map_err(|e| e.to_string())?;
        let block = MetricBlock::compute(&m.labels, &preds, &scores).map_err(|e| e.to_string())?;
        Ok((block, prediction_rows(docs, &preds, &scores)))
    };
    let (train_block, train_rows) = evaluate(&tr, train)?;
    let (val_block, val_rows) = evaluate(&va, val)?;
    Ok(CellResult {
        best_params: cv.best_params.clone(),
        cv,
        selected_terms: tr.feature_names.clone(),
        train: train_block,
        val: val_block,
        predictions: Predictions {
            train: train_rows,
            val: val_rows,
        },
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ReportBundle, RunError> {
    run_experiment_with_progress(cfg, &mut |_| {})
}

/// As [`run_experiment`], reporting each finished stage to `progress`.
pub fn run_experiment_with_progress(cfg: &ExperimentConfig, progress: &mut dyn FnMut(&str)) -> Result<ReportBundle, RunError> {
    cfg.validate()?;
    let (docs, empty_docs) = load_documents(cfg)?;
    let (train, val) = split_documents(cfg, &docs)?;
    let stats = TrainingStats::fit(&train, cfg.min_df, cfg.variance_threshold)?;
    progress(&format!(
        "{} documents, {} train / {} validation, {} terms, {} after variance filter",
        docs.len(),
        train.len(),
        val.len(),
        stats.tfidf.n_features(),
        stats.width()
    ));

    let (sweep, sweep_error) = if cfg.sweep.enabled {
        match run_sweep(cfg, &stats, &train, &val) {
            Ok(r) => {
                progress(&format!("sweep chose {} attributes", r.chosen_count));
                (Some(r), None)
            }
            Err(e) => (None, Some(e)),
        }
    } else {
        (None, None)
    };

    let train_labels: Vec<u8> = train.iter().map(|d| d.label).collect();
    let splits = stratified_kfold(&train_labels, cfg.n_folds, derive_seed(cfg.seed, &[STREAM_FOLDS]))?;
    let folds: Result<Vec<FoldStats>, PipelineError> = splits
        .iter()
        .map(|s| {
            let ftrain = pick(&train, &s.train);
            Ok(FoldStats {
                stats: TrainingStats::fit(&ftrain, cfg.min_df, cfg.variance_threshold)?,
                train: ftrain,
                val: pick(&train, &s.val),
            })
        })
        .collect();

    let mut cells = Vec::new();
    for &k in &cfg.k_values {
        let prepared = match &folds {
            Ok(f) => fold_data(f, k).map_err(|e| e.to_string()),
            Err(e) => Err(format!("fold features: {e}")),
        };
        for &family in &cfg.families {
            let outcome = prepared
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|fd| run_cell(cfg, &stats, &train, &val, fd, k, family));
            match &outcome {
                Ok(r) => progress(&format!(
                    "k={k} {family}: train F1 {:.4}, validation F1 {:.4}",
                    r.train.f1_w, r.val.f1_w
                )),
                Err(e) => progress(&format!("k={k} {family}: failed: {e}")),
            }
            let (result, error) = match outcome {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e)),
            };
            cells.push(Cell { k, family, result, error });
        }
    }

    Ok(ReportBundle {
        seed: cfg.seed,
        config_hash: cfg.hash(),
        k_values: cfg.k_values.clone(),
        families: cfg.families.clone(),
        corpus: CorpusSummary {
            n_docs: docs.len(),
            n_positive: docs.iter().filter(|d| d.label == 1).count(),
            n_train: train.len(),
            n_val: val.len(),
            empty_docs,
        },
        vocabulary_size: stats.tfidf.n_features(),
        n_after_variance: stats.width(),
        training_stats: stats.audit(&cfg.k_values),
        feature_scores: stats.scores.clone(),
        sweep,
        sweep_error,
        cells,
    })
}
