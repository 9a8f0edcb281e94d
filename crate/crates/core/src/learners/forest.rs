//! Bagged (random forest) and extremely randomized tree ensembles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::{Family, ForestParams};
use super::tree::DecisionTree;
use super::{Columns, LearnError};
use crate::seed::derive_seed;

/// Seed of the `index`-th tree of an ensemble fitted under `master`.
pub fn tree_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, &[index as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub seed: u64,
    /// Distinct training rows drawn into the tree's sample.
    pub n_in_bag: usize,
    /// Features the tree actually split on.
    pub split_features: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub family: Family,
    pub trees: Vec<DecisionTree>,
    pub records: Vec<TreeRecord>,
    pub n_features: usize,
}

impl Forest {
    pub fn fit(cols: &Columns, labels: &[u8], family: Family, params: &ForestParams, seed: u64) -> Result<Self, LearnError> {
        let n = labels.len();
        if n == 0 {
            return Err(LearnError::EmptyTrainingSet);
        }
        let fitted: Vec<(DecisionTree, TreeRecord)> = (0..params.n_estimators)
            .into_par_iter()
            .map(|t| {
                let s = tree_seed(seed, t);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let indices: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let mut seen = vec![false; n];
                indices.iter().for_each(|&i| seen[i] = true);
                let n_in_bag = seen.iter().filter(|&&b| b).count();
                let tree = DecisionTree::fit_on(cols, labels, indices, &params.tree, &mut rng)?;
                let split_features = tree.split_features();
                Ok((
                    tree,
                    TreeRecord {
                        seed: s,
                        n_in_bag,
                        split_features,
                    },
                ))
            })
            .collect::<Result<_, LearnError>>()?;
        let (trees, records) = fitted.into_iter().unzip();
        Ok(Self {
            family,
            trees,
            records,
            n_features: cols.n_features(),
        })
    }

    /// Mean of per-tree leaf positive fractions.
    pub fn proba_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.proba_row(row)).sum::<f64>() / self.trees.len() as f64
    }

    /// Majority vote of per-tree labels; ties go to class 0.
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let votes = self.trees.iter().filter(|t| t.predict_row(row) == 1).count();
        u8::from(2 * votes > self.trees.len())
    }
}
