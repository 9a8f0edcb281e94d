//! Stratified splitting, stratified k-fold cross-validation and exhaustive
//! grid search scored by weighted F1.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learners::{Family, HyperParams, LearnError, Model, ParamValue};
use crate::metrics::weighted_f1_score;
use crate::seed::derive_seed;
use crate::vectorizer::FeatureMatrix;

#[derive(Debug, Error)]
pub enum TuneError {
    #[error("validation fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("class {class} has {count} members; at least {needed} are required")]
    ClassTooSmall { class: u8, count: usize, needed: usize },
    #[error("fold count must be at least 2, got {0}")]
    BadFoldCount(usize),
    #[error("grid for {family} has no axes or an empty axis `{axis}`")]
    EmptyGrid { family: Family, axis: String },
    #[error("invalid grid for {family}: {source}")]
    InvalidGrid { family: Family, source: LearnError },
    #[error("every candidate failed; first error: {0}")]
    AllFailed(String),
    #[error("writing export: {0}")]
    Io(#[from] std::io::Error),
}

/// Candidate settings per hyperparameter name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub family: Family,
    pub axes: BTreeMap<String, Vec<ParamValue>>,
}

impl ParamGrid {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            axes: BTreeMap::new(),
        }
    }

    pub fn axis(mut self, name: &str, values: Vec<ParamValue>) -> Self {
        self.axes.insert(name.to_string(), values);
        self
    }

    pub fn n_candidates(&self) -> usize {
        self.axes.values().map(Vec::len).product()
    }

    /// Cartesian product; axes in name order, the last axis varying fastest.
    pub fn candidates(&self) -> Vec<HyperParams> {
        let mut out = vec![HyperParams::new(self.family)];
        for (name, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|hp| values.iter().map(move |v| hp.clone().with(name, v.clone())))
                .collect();
        }
        out
    }

    pub fn validate(&self) -> Result<(), TuneError> {
        let empty = |axis: &str| TuneError::EmptyGrid {
            family: self.family,
            axis: axis.to_string(),
        };
        if self.axes.is_empty() {
            return Err(empty(""));
        }
        if let Some((name, _)) = self.axes.iter().find(|(_, v)| v.is_empty()) {
            return Err(empty(name));
        }
        for hp in self.candidates() {
            hp.validate().map_err(|source| TuneError::InvalidGrid {
                family: self.family,
                source,
            })?;
        }
        Ok(())
    }
}

/// Index sets of one train/validation partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

fn class_indices(labels: &[u8]) -> [Vec<usize>; 2] {
    let mut by_class = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        by_class[usize::from(y == 1)].push(i);
    }
    by_class
}

fn check_classes(by_class: &[Vec<usize>; 2], needed: usize) -> Result<(), TuneError> {
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < needed {
            return Err(TuneError::ClassTooSmall {
                class: c as u8,
                count: members.len(),
                needed,
            });
        }
    }
    Ok(())
}

/// Stratified holdout: `ceil(fraction * n)` validation rows, apportioned to
/// the classes by largest remainder.
pub fn train_val_split(labels: &[u8], val_fraction: f64, seed: u64) -> Result<IndexSplit, TuneError> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(TuneError::BadFraction(val_fraction));
    }
    let mut by_class = class_indices(labels);
    check_classes(&by_class, 2)?;
    let n = labels.len();
    let n_val = ((val_fraction * n as f64).ceil() as usize).min(n - 2);
    let exact: Vec<f64> = by_class.iter().map(|m| n_val as f64 * m.len() as f64 / n as f64).collect();
    let mut take: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let short = n_val - take.iter().sum::<usize>();
    if short > 0 {
        let c = if exact[1].fract() > exact[0].fract() { 1 } else { 0 };
        take[c] += short;
    }
    for c in 0..2 {
        take[c] = take[c].clamp(1, by_class[c].len() - 1);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = IndexSplit {
        train: Vec::new(),
        val: Vec::new(),
    };
    for c in 0..2 {
        by_class[c].shuffle(&mut rng);
        split.val.extend_from_slice(&by_class[c][..take[c]]);
        split.train.extend_from_slice(&by_class[c][take[c]..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    Ok(split)
}

/// Stratified folds: each class is shuffled, classes are concatenated, and
/// position `p` goes to fold `p % n_folds`.
pub fn stratified_kfold(labels: &[u8], n_folds: usize, seed: u64) -> Result<Vec<IndexSplit>, TuneError> {
    if n_folds < 2 {
        return Err(TuneError::BadFoldCount(n_folds));
    }
    let mut by_class = class_indices(labels);
    check_classes(&by_class, n_folds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    by_class.iter_mut().for_each(|m| m.shuffle(&mut rng));
    let mut fold_of = vec![0; labels.len()];
    for (p, &i) in by_class.iter().flatten().enumerate() {
        fold_of[i] = p % n_folds;
    }
    Ok((0..n_folds)
        .map(|f| {
            let (val, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| fold_of[i] == f);
            IndexSplit { train, val }
        })
        .collect())
}

/// Materialized matrices of one fold.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub train: FeatureMatrix,
    pub val: FeatureMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub params: HyperParams,
    pub fold_scores: Vec<f64>,
    /// `None` when any fold failed.
    pub mean: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub family: Family,
    pub n_folds: usize,
    pub candidates: Vec<CandidateResult>,
    pub best_index: usize,
    pub best_params: HyperParams,
    pub best_score: f64,
}

impl CvResult {
    /// One row per candidate: axis values, per-fold scores, mean, error.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TuneError> {
        let names: Vec<String> = self
            .candidates
            .iter()
            .flat_map(|c| c.params.values.keys().cloned())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut w = csv::Writer::from_writer(out);
        let mut header = names.clone();
        header.extend((0..self.n_folds).map(|f| format!("fold_{f}")));
        header.push("mean".into());
        header.push("error".into());
        w.write_record(&header).map_err(std::io::Error::from)?;
        for c in &self.candidates {
            let mut rec: Vec<String> = names
                .iter()
                .map(|n| c.params.values.get(n).map(ToString::to_string).unwrap_or_default())
                .collect();
            rec.extend((0..self.n_folds).map(|f| c.fold_scores.get(f).map(|s| format!("{s:.6}")).unwrap_or_default()));
            rec.push(c.mean.map(|m| format!("{m:.6}")).unwrap_or_default());
            rec.push(c.error.clone().unwrap_or_default());
            w.write_record(&rec).map_err(std::io::Error::from)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn evaluate(hp: &HyperParams, fold: &FoldData, seed: u64) -> Result<f64, String> {
    let model = Model::fit(&fold.train, hp, seed).map_err(|e| e.to_string())?;
    let preds = model.predict(&fold.val).map_err(|e| e.to_string())?;
    weighted_f1_score(&fold.val.labels, &preds).map_err(|e| e.to_string())
}

/// Scores every grid candidate on pre-built folds. The evaluation of
/// candidate `c` on fold `f` is seeded by `derive_seed(seed, [c, f])`.
pub fn grid_search_folds(grid: &ParamGrid, folds: &[FoldData], seed: u64) -> Result<CvResult, TuneError> {
    grid.validate()?;
    let candidates = grid.candidates();
    let jobs: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..folds.len()).map(move |f| (c, f)))
        .collect();
    let outcomes: Vec<Result<f64, String>> = jobs
        .par_iter()
        .map(|&(c, f)| evaluate(&candidates[c], &folds[f], derive_seed(seed, &[c as u64, f as u64])))
        .collect();
    let mut results = Vec::with_capacity(candidates.len());
    for (c, hp) in candidates.into_iter().enumerate() {
        let mine = &outcomes[c * folds.len()..(c + 1) * folds.len()];
        let error = mine.iter().find_map(|r| r.as_ref().err().cloned());
        let fold_scores: Vec<f64> = mine.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let mean = if error.is_none() && !fold_scores.is_empty() {
            let lo = fold_scores.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = fold_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Some((fold_scores.iter().sum::<f64>() / fold_scores.len() as f64).clamp(lo, hi))
        } else {
            None
        };
        results.push(CandidateResult {
            params: hp,
            fold_scores,
            mean,
            error,
        });
    }
    let mut best: Option<usize> = None;
    for (i, r) in results.iter().enumerate() {
        if let Some(m) = r.mean {
            if best.is_none_or(|b| m > results[b].mean.unwrap()) {
                best = Some(i);
            }
        }
    }
    let Some(best_index) = best else {
        let first = results.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(TuneError::AllFailed(first));
    };
    Ok(CvResult {
        family: grid.family,
        n_folds: folds.len(),
        best_params: results[best_index].params.clone(),
        best_score: results[best_index].mean.unwrap(),
        best_index,
        candidates: results,
    })
}

/// Grid search with stratified folds over the rows of a fixed matrix.
pub fn grid_search(grid: &ParamGrid, matrix: &FeatureMatrix, n_folds: usize, seed: u64) -> Result<CvResult, TuneError> {
    let folds: Vec<FoldData> = stratified_kfold(&matrix.labels, n_folds, seed)?
        .into_iter()
        .map(|s| FoldData {
            train: matrix.select_rows(&s.train),
            val: matrix.select_rows(&s.val),
        })
        .collect();
    grid_search_folds(grid, &folds, seed)
}
