//! Report files: per-k tables, metrics, tuned parameters, CV results,
//! raw predictions, feature scores, sweep data and the run manifest.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{hex, ExperimentConfig};
use super::run::{Cell, PredictionRow, ReportBundle};
use crate::corpus::{LemmaTable, StopwordList};
use crate::learners::Family;
use crate::metrics::MetricBlock;
use crate::selector::{select_k_best, FeatureScores};

/// Column groups of a table, in print order.
pub const TABLE_BLOCKS: [[Family; 3]; 2] = [
    [Family::DecisionTree, Family::Knn, Family::Mlp],
    [Family::ExtraTrees, Family::RandomForest, Family::Gbt],
];

type Getter = fn(&MetricBlock) -> f64;

const ROWS: [(&str, Getter); 8] = [
    ("Recall (TPR)", |m| m.recall_tpr),
    ("Specificity (TNR)", |m| m.specificity_tnr),
    ("Precision (weighted)", |m| m.precision_w),
    ("Recall (weighted)", |m| m.recall_w),
    ("F1 (weighted)", |m| m.f1_w),
    ("F1 (per-class, weighted)*", |m| m.f1_w_per_class),
    ("G-mean", |m| m.g_mean),
    ("AUC", |m| m.auc),
];

const LABEL_WIDTH: usize = 28;
const CELL_WIDTH: usize = 12;

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// Plain-text table for one k: a row per metric, a training and a
/// validation column per model.
pub fn render_table(bundle: &ReportBundle, k: usize) -> String {
    let mut out = format!("Model Performance Evaluation for k={k}\n");
    for block in TABLE_BLOCKS {
        let cells: Vec<&Cell> = block.iter().filter_map(|&f| bundle.cell(k, f)).collect();
        if cells.is_empty() {
            continue;
        }
        out.push('\n');
        let mut head = format!("{:<LABEL_WIDTH$}", "");
        let mut sub = format!("{:<LABEL_WIDTH$}", "Metric");
        for c in &cells {
            head.push_str(&format!("{:<w$}", c.family.display_name(), w = 2 * CELL_WIDTH));
            sub.push_str(&format!("{:<CELL_WIDTH$}{:<CELL_WIDTH$}", "Training", "Validation"));
        }
        out.push_str(head.trim_end());
        out.push('\n');
        out.push_str(sub.trim_end());
        out.push('\n');
        for (label, get) in ROWS {
            let mut line = format!("{label:<LABEL_WIDTH$}");
            for c in &cells {
                match &c.result {
                    Some(r) => {
                        line.push_str(&format!("{:<CELL_WIDTH$.4}{:<CELL_WIDTH$.4}", get(&r.train), get(&r.val)));
                    }
                    None => line.push_str(&format!("{:<CELL_WIDTH$}{:<CELL_WIDTH$}", "error", "error")),
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
    }
    out.push_str(
        "\nF1 (weighted) is the harmonic mean of the weighted precision and weighted recall rows.\n\
         * Support-weighted mean of the per-class F1 scores, shown for comparison.\n",
    );
    let failed: Vec<&Cell> = bundle.cells.iter().filter(|c| c.k == k && c.error.is_some()).collect();
    for c in failed {
        out.push_str(&format!("{} failed: {}\n", c.family.display_name(), c.error.as_deref().unwrap_or("")));
    }
    out
}

fn write_metrics_csv<W: Write>(bundle: &ReportBundle, k: usize, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "k", "family", "split", "recall_tpr", "specificity_tnr", "precision_w", "recall_w", "f1_w", "f1_w_per_class",
        "g_mean", "auc", "tp", "fp", "tn", "fn", "warnings", "error",
    ])
    .map_err(csv_err)?;
    for c in bundle.cells.iter().filter(|c| c.k == k) {
        match &c.result {
            Some(r) => {
                for (split, m) in [("train", &r.train), ("val", &r.val)] {
                    let mut rec = vec![k.to_string(), c.family.key().to_string(), split.to_string()];
                    rec.extend(ROWS.iter().map(|(_, get)| format!("{:.6}", get(m))));
                    let cf = &m.confusion;
                    rec.extend([cf.tp, cf.fp, cf.tn, cf.fn_].iter().map(ToString::to_string));
                    rec.push(m.warnings.to_string());
                    rec.push(String::new());
                    w.write_record(&rec).map_err(csv_err)?;
                }
            }
            None => {
                let mut rec = vec![k.to_string(), c.family.key().to_string(), String::new()];
                rec.extend(std::iter::repeat_n(String::new(), 13));
                rec.push(c.error.clone().unwrap_or_default());
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
    }
    w.flush()
}

fn render_best_params(bundle: &ReportBundle, k: usize) -> String {
    let mut out = format!("Tuned hyperparameters for k={k}\n\n");
    for c in bundle.cells.iter().filter(|c| c.k == k) {
        match &c.result {
            Some(r) => out.push_str(&format!(
                "{}: {} (mean CV F1 {:.4})\n",
                c.family.display_name(),
                r.best_params.describe(),
                r.cv.best_score
            )),
            None => out.push_str(&format!("{}: failed: {}\n", c.family.display_name(), c.error.as_deref().unwrap_or(""))),
        }
    }
    out
}

/// CSV of `id,truth,pred,score`.
pub fn write_predictions<W: Write>(rows: &[PredictionRow], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "truth", "pred", "score"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.id.clone(), r.truth.to_string(), r.pred.to_string(), format!("{:?}", r.score)])
            .map_err(csv_err)?;
    }
    w.flush()
}

/// Truth, predicted labels and scores read back from a predictions CSV.
pub fn read_predictions(path: &Path) -> io::Result<(Vec<u8>, Vec<u8>, Vec<f64>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, format!("missing column `{name}`")))
    };
    let (ti, pi, si) = (col("truth")?, col("pred")?, col("score")?);
    let (mut truth, mut pred, mut score) = (Vec::new(), Vec::new(), Vec::new());
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |what: &str| io::Error::new(io::ErrorKind::InvalidData, format!("row {}: bad {what}", n + 1));
        truth.push(rec[ti].trim().parse::<u8>().map_err(|_| bad("truth"))?);
        pred.push(rec[pi].trim().parse::<u8>().map_err(|_| bad("pred"))?);
        score.push(rec[si].trim().parse::<f64>().map_err(|_| bad("score"))?);
    }
    Ok((truth, pred, score))
}

fn subset_scores(scores: &FeatureScores, k: usize) -> Option<FeatureScores> {
    let mask = select_k_best(scores, k).ok()?;
    Some(FeatureScores {
        scores: mask.kept.iter().map(|&j| scores.scores[j]).collect(),
        feature_names: mask.kept.iter().map(|&j| scores.feature_names[j].clone()).collect(),
        class_means: mask.kept.iter().map(|&j| scores.class_means[j]).collect(),
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub package_version: String,
    pub input_sha256: String,
    pub stopwords_sha256: String,
    pub lemmas_sha256: String,
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig, started_unix: u64, finished_unix: u64) -> io::Result<Self> {
        Ok(Self {
            seed: cfg.seed,
            config_hash: cfg.hash(),
            config: cfg.clone(),
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            input_sha256: sha256_hex(&fs::read(&cfg.input.path)?),
            stopwords_sha256: sha256_hex(StopwordList::bundled_source().as_bytes()),
            lemmas_sha256: sha256_hex(LemmaTable::bundled_source().as_bytes()),
            started_unix,
            finished_unix,
        })
    }
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Writes every report file into `out_dir` and returns the paths written.
pub fn emit_reports(bundle: &ReportBundle, manifest: &Manifest, out_dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, bytes: Vec<u8>| -> io::Result<()> {
        let p = out_dir.join(name);
        fs::write(&p, bytes)?;
        written.push(p);
        Ok(())
    };
    put("report.json".into(), bundle.to_json().into_bytes())?;
    put(
        "manifest.json".into(),
        serde_json::to_vec_pretty(manifest).map_err(io::Error::other)?,
    )?;
    let mut buf = Vec::new();
    bundle.feature_scores.write_csv(&mut buf).map_err(io::Error::other)?;
    put("feature_scores.csv".into(), buf)?;
    if let Some(s) = &bundle.sweep {
        let mut buf = Vec::new();
        s.write_csv(&mut buf).map_err(io::Error::other)?;
        put("sweep.csv".into(), buf)?;
    }
    for &k in &bundle.k_values {
        put(format!("table_k{k}.txt"), render_table(bundle, k).into_bytes())?;
        let cells: Vec<&Cell> = bundle.cells.iter().filter(|c| c.k == k).collect();
        put(
            format!("metrics_k{k}.json"),
            serde_json::to_vec_pretty(&cells).map_err(io::Error::other)?,
        )?;
        let mut buf = Vec::new();
        write_metrics_csv(bundle, k, &mut buf)?;
        put(format!("metrics_k{k}.csv"), buf)?;
        put(format!("best_params_k{k}.txt"), render_best_params(bundle, k).into_bytes())?;
        if let Some(sub) = subset_scores(&bundle.feature_scores, k) {
            let mut buf = Vec::new();
            sub.write_csv(&mut buf).map_err(io::Error::other)?;
            put(format!("feature_scores_k{k}.csv"), buf)?;
        }
        for c in &cells {
            let Some(r) = &c.result else { continue };
            let fam = c.family.key();
            let mut buf = Vec::new();
            r.cv.write_csv(&mut buf).map_err(io::Error::other)?;
            put(format!("cv_k{k}_{fam}.csv"), buf)?;
            for (split, rows) in [("train", &r.predictions.train), ("val", &r.predictions.val)] {
                let mut buf = Vec::new();
                write_predictions(rows, &mut buf)?;
                put(format!("predictions_k{k}_{fam}_{split}.csv"), buf)?;
            }
        }
    }
    Ok(written)
}
