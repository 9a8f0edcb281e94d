//! The six classifier families behind one fit / predict contract.

pub mod forest;
pub mod gbt;
pub mod knn;
pub mod mlp;
pub mod params;
pub mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vectorizer::FeatureMatrix;
pub use params::{Family, HyperParams, ParamValue};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("model was fitted on {expected} features but got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("`{name}` is not a hyperparameter of {family}")]
    UnknownParam { family: Family, name: String },
    #[error("bad value for `{name}`: {message}")]
    BadParam { name: String, message: String },
    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
}

/// Column-major copy of a training matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Columns {
    pub data: Vec<Vec<f64>>,
    pub n_rows: usize,
}

impl Columns {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let width = rows.first().map_or(0, Vec::len);
        let data = (0..width).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Self {
            data,
            n_rows: rows.len(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.iter().map(|c| c[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Tree(tree::DecisionTree),
    Forest(forest::Forest),
    Gbt(gbt::BoostedTrees),
    Knn(knn::Knn),
    Mlp(mlp::Mlp),
}

impl Model {
    pub fn fit(matrix: &FeatureMatrix, hp: &HyperParams, seed: u64) -> Result<Self, LearnError> {
        hp.validate()?;
        if matrix.n_rows() == 0 {
            return Err(LearnError::EmptyTrainingSet);
        }
        let labels = &matrix.labels;
        Ok(match hp.family {
            Family::DecisionTree => {
                let p = params::TreeParams::from_hp(hp)?;
                Model::Tree(tree::DecisionTree::fit(&Columns::from_rows(&matrix.rows), labels, &p, seed)?)
            }
            Family::RandomForest | Family::ExtraTrees => {
                let p = params::ForestParams::from_hp(hp)?;
                let cols = Columns::from_rows(&matrix.rows);
                Model::Forest(forest::Forest::fit(&cols, labels, hp.family, &p, seed)?)
            }
            Family::Gbt => {
                let p = params::GbtParams::from_hp(hp)?;
                Model::Gbt(gbt::BoostedTrees::fit(&Columns::from_rows(&matrix.rows), labels, &p, seed)?)
            }
            Family::Knn => Model::Knn(knn::Knn::fit(&matrix.rows, labels, &params::KnnParams::from_hp(hp)?)?),
            Family::Mlp => Model::Mlp(mlp::Mlp::fit(&matrix.rows, labels, &params::MlpParams::from_hp(hp)?, seed)?),
        })
    }

    pub fn family(&self) -> Family {
        match self {
            Model::Tree(_) => Family::DecisionTree,
            Model::Forest(f) => f.family,
            Model::Gbt(_) => Family::Gbt,
            Model::Knn(_) => Family::Knn,
            Model::Mlp(_) => Family::Mlp,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Tree(t) => t.n_features,
            Model::Forest(f) => f.n_features,
            Model::Gbt(g) => g.n_features,
            Model::Knn(k) => k.rows.first().map_or(0, Vec::len),
            Model::Mlp(m) => m.n_features,
        }
    }

    fn check_width(&self, matrix: &FeatureMatrix) -> Result<(), LearnError> {
        let expected = self.n_features();
        match matrix.rows.iter().find(|r| r.len() != expected) {
            Some(r) => Err(LearnError::WidthMismatch { expected, got: r.len() }),
            None => Ok(()),
        }
    }

    fn score_row(&self, row: &[f64]) -> f64 {
        match self {
            Model::Tree(t) => t.proba_row(row),
            Model::Forest(f) => f.proba_row(row),
            Model::Gbt(g) => g.proba_row(row),
            Model::Knn(k) => k.proba_row(row),
            Model::Mlp(m) => m.proba_row(row),
        }
    }

    fn label_row(&self, row: &[f64]) -> u8 {
        match self {
            Model::Tree(t) => t.predict_row(row),
            Model::Forest(f) => f.predict_row(row),
            Model::Knn(k) => k.predict_row(row),
            Model::Gbt(_) | Model::Mlp(_) => u8::from(self.score_row(row) >= 0.5),
        }
    }

    /// Positive-class scores in `[0, 1]`.
    pub fn predict_proba(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>, LearnError> {
        self.check_width(matrix)?;
        Ok(matrix.rows.iter().map(|r| self.score_row(r)).collect())
    }

    pub fn predict(&self, matrix: &FeatureMatrix) -> Result<Vec<u8>, LearnError> {
        self.check_width(matrix)?;
        Ok(matrix.rows.iter().map(|r| self.label_row(r)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> FeatureMatrix {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 12.0, ((i * 7) % 5) as f64 / 5.0]).collect();
        let labels = (0..12).map(|i| u8::from(i >= 6)).collect();
        FeatureMatrix::from_rows(rows, labels)
    }

    #[test]
    fn every_family_fits_and_scores_in_unit_interval() {
        let m = toy();
        for family in Family::ALL {
            let mut hp = HyperParams::new(family);
            if family == Family::Knn {
                hp = hp.with("n_neighbors", 3i64);
            }
            if matches!(family, Family::RandomForest | Family::ExtraTrees | Family::Gbt) {
                hp = hp.with("n_estimators", 10i64);
            }
            let model = Model::fit(&m, &hp, 1).unwrap();
            assert_eq!(model.family(), family);
            let p = model.predict_proba(&m).unwrap();
            assert!(p.iter().all(|s| (0.0..=1.0).contains(s)));
            assert_eq!(model.predict(&m).unwrap().len(), 12);
        }
    }

    #[test]
    fn width_mismatch_is_reported() {
        let model = Model::fit(&toy(), &HyperParams::new(Family::DecisionTree), 0).unwrap();
        let narrow = FeatureMatrix::from_rows(vec![vec![0.0]], vec![0]);
        assert_eq!(
            model.predict(&narrow),
            Err(LearnError::WidthMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn score_one_half_is_labelled_positive() {
        let net = mlp::Mlp::zeroed(2, &[3], params::Activation::Relu);
        let model = Model::Mlp(net);
        let m = FeatureMatrix::from_rows(vec![vec![0.0, 0.0]], vec![0]);
        assert_eq!(model.predict_proba(&m).unwrap(), vec![0.5]);
        assert_eq!(model.predict(&m).unwrap(), vec![1]);
    }
}
