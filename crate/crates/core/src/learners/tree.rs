//! Binary classification trees (CART-style greedy partitioning).
//!
//! Samples with `x[feature] < threshold` go left, the rest right. Candidate
//! thresholds for the best splitter are midpoints between consecutive
//! distinct values; the first candidate (feature order, then ascending
//! threshold) with the largest impurity decrease wins.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{Criterion, Splitter, TreeParams};
use super::{Columns, LearnError};

/// Node impurity of a class-count vector; `0 * log 0 = 0`.
pub fn impurity(counts: &[usize], criterion: Criterion) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    match criterion {
        Criterion::Gini => 1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>(),
        Criterion::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                p * p.log2()
            })
            .sum::<f64>(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub class_counts: [usize; 2],
    pub split: Option<Split>,
}

impl TreeNode {
    /// Majority class; ties go to class 0.
    pub fn majority(&self) -> u8 {
        u8::from(self.class_counts[1] > self.class_counts[0])
    }

    pub fn positive_fraction(&self) -> f64 {
        let total = self.class_counts[0] + self.class_counts[1];
        if total == 0 {
            0.0
        } else {
            self.class_counts[1] as f64 / total as f64
        }
    }
}

/// A fitted tree. Nodes are stored in pre-order; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
}

/// Best candidate split found at a node.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

struct Builder<'a> {
    cols: &'a Columns,
    labels: &'a [u8],
    params: &'a TreeParams,
    n_candidates: usize,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
    scratch: Vec<(f64, u8)>,
}

impl DecisionTree {
    pub fn fit(cols: &Columns, labels: &[u8], params: &TreeParams, seed: u64) -> Result<Self, LearnError> {
        let indices: Vec<usize> = (0..labels.len()).collect();
        Self::fit_on(cols, labels, indices, params, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Fits on a sample multiset (duplicates allowed, as in a bootstrap).
    pub(crate) fn fit_on(
        cols: &Columns,
        labels: &[u8],
        mut indices: Vec<usize>,
        params: &TreeParams,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, LearnError> {
        if indices.is_empty() {
            return Err(LearnError::EmptyTrainingSet);
        }
        let mut b = Builder {
            cols,
            labels,
            params,
            n_candidates: params.max_features.resolve(cols.n_features()),
            rng: rng.clone(),
            nodes: Vec::new(),
            scratch: Vec::with_capacity(indices.len()),
        };
        b.grow(&mut indices, 0);
        *rng = b.rng;
        Ok(Self {
            nodes: b.nodes,
            n_features: cols.n_features(),
        })
    }

    pub fn leaf_for(&self, row: &[f64]) -> &TreeNode {
        let mut node = &self.nodes[0];
        while let Some(s) = node.split {
            node = if row[s.feature] < s.threshold {
                &self.nodes[s.left]
            } else {
                &self.nodes[s.right]
            };
        }
        node
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        self.leaf_for(row).majority()
    }

    pub fn proba_row(&self, row: &[f64]) -> f64 {
        self.leaf_for(row).positive_fraction()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i].split {
                None => 0,
                Some(s) => 1 + go(nodes, s.left).max(go(nodes, s.right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Sorted distinct features used by splits.
    pub fn split_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self.nodes.iter().filter_map(|n| n.split.map(|s| s.feature)).collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

impl Builder<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let mut counts = [0usize; 2];
        for &i in idx.iter() {
            counts[self.labels[i] as usize] += 1;
        }
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            class_counts: counts,
            split: None,
        });

        let n = idx.len();
        let p = self.params;
        let parent = impurity(&counts, p.criterion);
        if parent == 0.0
            || p.max_depth.is_some_and(|d| depth >= d)
            || n < p.min_samples_split
            || n < 2 * p.min_samples_leaf
        {
            return id;
        }

        let Some(best) = self.find_split(idx, &counts, parent) else {
            return id;
        };

        // stable partition: left block keeps its relative order
        let col = &self.cols.data[best.feature];
        let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| col[i] < best.threshold);
        let n_left = left.len();
        idx[..n_left].copy_from_slice(&left);
        idx[n_left..].copy_from_slice(&right);
        let (l, r) = idx.split_at_mut(n_left);
        let left_id = self.grow(l, depth + 1);
        let right_id = self.grow(r, depth + 1);
        self.nodes[id].split = Some(Split {
            feature: best.feature,
            threshold: best.threshold,
            left: left_id,
            right: right_id,
        });
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let v = self.cols.n_features();
        if self.n_candidates >= v {
            (0..v).collect()
        } else {
            sample(&mut self.rng, v, self.n_candidates).into_vec()
        }
    }

    fn find_split(&mut self, idx: &[usize], counts: &[usize; 2], parent: f64) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for f in self.candidate_features() {
            let cand = match self.params.splitter {
                Splitter::Best => self.best_threshold(f, idx, counts, parent),
                Splitter::Random => self.random_threshold(f, idx, counts, parent),
            };
            if let Some(c) = cand {
                if best.is_none_or(|b| c.decrease > b.decrease) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn decrease(&self, parent: f64, left: [usize; 2], right: [usize; 2]) -> f64 {
        let nl = (left[0] + left[1]) as f64;
        let nr = (right[0] + right[1]) as f64;
        let n = nl + nr;
        parent
            - (nl / n) * impurity(&left, self.params.criterion)
            - (nr / n) * impurity(&right, self.params.criterion)
    }

    fn best_threshold(&mut self, f: usize, idx: &[usize], counts: &[usize; 2], parent: f64) -> Option<Candidate> {
        let col = &self.cols.data[f];
        self.scratch.clear();
        self.scratch.extend(idx.iter().map(|&i| (col[i], self.labels[i])));
        self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = self.scratch.len();
        let min_leaf = self.params.min_samples_leaf;
        let mut left = [0usize; 2];
        let mut best: Option<Candidate> = None;
        for k in 0..n - 1 {
            left[self.scratch[k].1 as usize] += 1;
            let (lo, hi) = (self.scratch[k].0, self.scratch[k + 1].0);
            if lo >= hi || k + 1 < min_leaf || n - k - 1 < min_leaf {
                continue;
            }
            let right = [counts[0] - left[0], counts[1] - left[1]];
            let d = self.decrease(parent, left, right);
            if best.is_none_or(|b| d > b.decrease) {
                let mut threshold = lo / 2.0 + hi / 2.0;
                if threshold <= lo || threshold > hi {
                    threshold = hi;
                }
                best = Some(Candidate {
                    feature: f,
                    threshold,
                    decrease: d,
                });
            }
        }
        best
    }

    fn random_threshold(&mut self, f: usize, idx: &[usize], counts: &[usize; 2], parent: f64) -> Option<Candidate> {
        let col = &self.cols.data[f];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in idx {
            lo = lo.min(col[i]);
            hi = hi.max(col[i]);
        }
        if lo >= hi {
            return None;
        }
        let mut threshold = lo + self.rng.gen::<f64>() * (hi - lo);
        if threshold <= lo {
            threshold = lo / 2.0 + hi / 2.0;
        }
        let mut left = [0usize; 2];
        for &i in idx {
            if col[i] < threshold {
                left[self.labels[i] as usize] += 1;
            }
        }
        let right = [counts[0] - left[0], counts[1] - left[1]];
        let min_leaf = self.params.min_samples_leaf;
        if left[0] + left[1] < min_leaf || right[0] + right[1] < min_leaf {
            return None;
        }
        Some(Candidate {
            feature: f,
            threshold,
            decrease: self.decrease(parent, left, right),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::params::MaxFeatures;

    fn cols(rows: &[Vec<f64>]) -> Columns {
        Columns::from_rows(rows)
    }

    #[test]
    fn impurity_examples() {
        assert_eq!(impurity(&[10, 0], Criterion::Gini), 0.0);
        assert_eq!(impurity(&[10, 0], Criterion::Entropy), 0.0);
        assert_eq!(impurity(&[5, 5], Criterion::Gini), 0.5);
        assert_eq!(impurity(&[5, 5], Criterion::Entropy), 1.0);
        assert!((impurity(&[3, 1], Criterion::Gini) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn impurity_is_zero_only_when_pure_and_peaks_at_uniform() {
        for crit in [Criterion::Gini, Criterion::Entropy] {
            for a in 0..=10usize {
                let v = impurity(&[a, 10 - a], crit);
                assert_eq!(v == 0.0, a == 0 || a == 10);
                assert!(v <= impurity(&[5, 5], crit) + 1e-15);
            }
        }
    }

    #[test]
    fn one_feature_split_at_midpoint() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let params = TreeParams {
            max_depth: Some(1),
            ..TreeParams::default()
        };
        let t = DecisionTree::fit(&cols(&rows), &[0, 0, 1, 1], &params, 0).unwrap();
        let s = t.nodes[0].split.unwrap();
        assert_eq!((s.feature, s.threshold), (0, 1.5));
        assert_eq!(t.nodes[s.left].class_counts, [2, 0]);
        assert_eq!(t.nodes[s.right].class_counts, [0, 2]);
    }

    #[test]
    fn pure_and_depth_zero_give_single_leaf() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0]];
        let t = DecisionTree::fit(&cols(&rows), &[1, 1, 1], &TreeParams::default(), 0).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict_row(&[5.0]), 1);

        let params = TreeParams {
            max_depth: Some(0),
            ..TreeParams::default()
        };
        let t = DecisionTree::fit(&cols(&rows), &[0, 1, 1], &params, 0).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict_row(&[0.0]), 1);
    }

    #[test]
    fn unlimited_depth_fits_distinct_rows() {
        // XOR needs a zero-gain first split
        let rows = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let labels = [0, 1, 1, 0];
        let t = DecisionTree::fit(&cols(&rows), &labels, &TreeParams::default(), 0).unwrap();
        for (r, &y) in rows.iter().zip(&labels) {
            assert_eq!(t.predict_row(r), y);
        }
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels = [0, 1, 0, 1, 0, 1, 1, 0, 1, 1];
        let params = TreeParams {
            min_samples_leaf: 3,
            ..TreeParams::default()
        };
        let t = DecisionTree::fit(&cols(&rows), &labels, &params, 0).unwrap();
        for n in t.nodes.iter().filter(|n| n.split.is_none()) {
            assert!(n.class_counts.iter().sum::<usize>() >= 3);
        }
    }

    #[test]
    fn predict_walks_to_leaf_majority() {
        // root splits on f0 at 0.5; left leaf (3 zeros, 1 one), right leaf (0, 2)
        let t = DecisionTree {
            nodes: vec![
                TreeNode {
                    class_counts: [3, 3],
                    split: Some(Split {
                        feature: 0,
                        threshold: 0.5,
                        left: 1,
                        right: 2,
                    }),
                },
                TreeNode {
                    class_counts: [3, 1],
                    split: None,
                },
                TreeNode {
                    class_counts: [0, 2],
                    split: None,
                },
            ],
            n_features: 1,
        };
        assert_eq!(t.predict_row(&[0.2]), 0);
        assert_eq!(t.proba_row(&[0.2]), 0.25);
        assert_eq!(t.predict_row(&[0.5]), 1);
        assert_eq!(t.proba_row(&[0.9]), 1.0);
    }

    #[test]
    fn random_splitter_is_seed_deterministic() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i * 7 % 11) as f64, (i % 5) as f64]).collect();
        let labels: Vec<u8> = (0..30).map(|i| u8::from(i % 3 == 0)).collect();
        let params = TreeParams {
            splitter: Splitter::Random,
            max_features: MaxFeatures::Count(1),
            ..TreeParams::default()
        };
        let a = DecisionTree::fit(&cols(&rows), &labels, &params, 11).unwrap();
        let b = DecisionTree::fit(&cols(&rows), &labels, &params, 11).unwrap();
        assert_eq!(a, b);
    }
}
