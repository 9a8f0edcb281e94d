//! Newton boosting of regression trees on the logistic loss.
//!
//! Each round fits a tree to gradients `g = p - y` and hessians
//! `h = p (1 - p)` of the current margin. Leaf weight is `-G / (H + lambda)`;
//! a split is kept only when its structure score
//! `1/2 [GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda)]` exceeds `gamma`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::GbtParams;
use super::tree::Split;
use super::{Columns, LearnError};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss of margins against labels.
pub fn log_loss(margins: &[f64], labels: &[u8]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(labels)
        .map(|(&z, &y)| z.max(0.0) - f64::from(y) * z + (-z.abs()).exp().ln_1p())
        .sum();
    total / margins.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegNode {
    pub weight: f64,
    pub grad_sum: f64,
    pub hess_sum: f64,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegNode>,
    pub features: Vec<usize>,
}

impl RegressionTree {
    pub fn value(&self, row: &[f64]) -> f64 {
        let mut node = &self.nodes[0];
        while let Some(s) = node.split {
            node = if row[s.feature] < s.threshold {
                &self.nodes[s.left]
            } else {
                &self.nodes[s.right]
            };
        }
        node.weight
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    /// Log-odds of the training positive rate.
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    pub n_features: usize,
    /// Set when the training labels are all one class.
    pub constant: Option<u8>,
    /// Training log-loss before the first round and after each round.
    pub loss_trace: Vec<f64>,
}

struct TreeFit<'a> {
    cols: &'a Columns,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbtParams,
    features: Vec<usize>,
    nodes: Vec<RegNode>,
    scratch: Vec<(f64, usize)>,
}

impl TreeFit<'_> {
    fn leaf_weight(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.params.lambda)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.params.lambda)
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let g: f64 = idx.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = idx.iter().map(|&i| self.hess[i]).sum();
        let id = self.nodes.len();
        self.nodes.push(RegNode {
            weight: self.leaf_weight(g, h),
            grad_sum: g,
            hess_sum: h,
            split: None,
        });
        if depth >= self.params.max_depth || idx.len() < 2 {
            return id;
        }
        let parent_score = self.score(g, h);
        let mut best: Option<(usize, f64, f64)> = None;
        for fi in 0..self.features.len() {
            let f = self.features[fi];
            let col = &self.cols.data[f];
            self.scratch.clear();
            self.scratch.extend(idx.iter().map(|&i| (col[i], i)));
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..self.scratch.len() - 1 {
                let i = self.scratch[k].1;
                gl += self.grad[i];
                hl += self.hess[i];
                let (lo, hi) = (self.scratch[k].0, self.scratch[k + 1].0);
                if lo >= hi {
                    continue;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(g - gl, h - hl) - parent_score);
                if best.is_none_or(|b| gain > b.2) {
                    let mut thr = lo / 2.0 + hi / 2.0;
                    if thr <= lo || thr > hi {
                        thr = hi;
                    }
                    best = Some((f, thr, gain));
                }
            }
        }
        let Some((feature, threshold, gain)) = best else {
            return id;
        };
        if gain - self.params.gamma <= 0.0 {
            return id;
        }
        let col = &self.cols.data[feature];
        let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| col[i] < threshold);
        let n_left = left.len();
        idx[..n_left].copy_from_slice(&left);
        idx[n_left..].copy_from_slice(&right);
        let (l, r) = idx.split_at_mut(n_left);
        let left_id = self.grow(l, depth + 1);
        let right_id = self.grow(r, depth + 1);
        self.nodes[id].split = Some(Split {
            feature,
            threshold,
            left: left_id,
            right: right_id,
        });
        id
    }
}

impl BoostedTrees {
    pub fn fit(cols: &Columns, labels: &[u8], params: &GbtParams, seed: u64) -> Result<Self, LearnError> {
        let n = labels.len();
        if n == 0 {
            return Err(LearnError::EmptyTrainingSet);
        }
        let n_pos = labels.iter().filter(|&&y| y == 1).count();
        if n_pos == 0 || n_pos == n {
            return Ok(Self {
                base_score: 0.0,
                learning_rate: params.learning_rate,
                trees: Vec::new(),
                n_features: cols.n_features(),
                constant: Some(u8::from(n_pos == n)),
                loss_trace: Vec::new(),
            });
        }
        let rate = n_pos as f64 / n as f64;
        let base_score = (rate / (1.0 - rate)).ln();
        let v = cols.n_features();
        let n_rows = ((params.subsample * n as f64).round() as usize).clamp(1, n);
        let n_cols = ((params.colsample_bytree * v as f64).floor() as usize).clamp(1, v);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut margins = vec![base_score; n];
        let mut loss_trace = vec![log_loss(&margins, labels)];
        let mut trees = Vec::with_capacity(params.n_estimators);
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        for _ in 0..params.n_estimators {
            for i in 0..n {
                let p = sigmoid(margins[i]);
                grad[i] = p - f64::from(labels[i]);
                hess[i] = p * (1.0 - p);
            }
            let mut rows: Vec<usize> = if n_rows == n {
                (0..n).collect()
            } else {
                let mut r = sample(&mut rng, n, n_rows).into_vec();
                r.sort_unstable();
                r
            };
            let features: Vec<usize> = if n_cols == v {
                (0..v).collect()
            } else {
                let mut f = sample(&mut rng, v, n_cols).into_vec();
                f.sort_unstable();
                f
            };
            let mut fit = TreeFit {
                cols,
                grad: &grad,
                hess: &hess,
                params,
                features,
                nodes: Vec::new(),
                scratch: Vec::with_capacity(rows.len()),
            };
            fit.grow(&mut rows, 0);
            let tree = RegressionTree {
                nodes: fit.nodes,
                features: fit.features,
            };
            for (i, m) in margins.iter_mut().enumerate() {
                *m += params.learning_rate * tree.value(&cols.row(i));
            }
            loss_trace.push(log_loss(&margins, labels));
            trees.push(tree);
        }
        Ok(Self {
            base_score,
            learning_rate: params.learning_rate,
            trees,
            n_features: v,
            constant: None,
            loss_trace,
        })
    }

    pub fn margin_row(&self, row: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.value(row)).sum::<f64>()
    }

    pub fn proba_row(&self, row: &[f64]) -> f64 {
        match self.constant {
            Some(c) => f64::from(c),
            None => sigmoid(self.margin_row(row)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_points() -> (Columns, Vec<u8>) {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        (Columns::from_rows(&rows), vec![0, 0, 1, 1])
    }

    #[test]
    fn balanced_labels_start_at_zero_margin() {
        let (cols, labels) = four_points();
        let m = BoostedTrees::fit(&cols, &labels, &GbtParams::default(), 0).unwrap();
        assert_eq!(m.base_score, 0.0);
    }

    #[test]
    fn loss_trace_is_non_increasing_on_separable_set() {
        let (cols, labels) = four_points();
        let params = GbtParams {
            learning_rate: 0.1,
            n_estimators: 100,
            max_depth: 2,
            ..GbtParams::default()
        };
        let m = BoostedTrees::fit(&cols, &labels, &params, 0).unwrap();
        assert_eq!(m.loss_trace.len(), 101);
        for w in m.loss_trace.windows(2) {
            assert!(w[1] <= w[0], "{} > {}", w[1], w[0]);
        }
        assert!(m.loss_trace[100] < m.loss_trace[0]);
    }

    #[test]
    fn huge_gamma_keeps_base_rate() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels = vec![0, 0, 0, 1, 0, 1, 1, 0, 1, 0];
        let params = GbtParams {
            gamma: 1e6,
            ..GbtParams::default()
        };
        let m = BoostedTrees::fit(&Columns::from_rows(&rows), &labels, &params, 0).unwrap();
        assert!(m.trees.iter().all(|t| t.n_leaves() == 1));
        for r in &rows {
            assert!((m.proba_row(r) - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn one_class_input_is_constant() {
        let rows = vec![vec![0.0], vec![1.0]];
        let m = BoostedTrees::fit(&Columns::from_rows(&rows), &[1, 1], &GbtParams::default(), 0).unwrap();
        assert_eq!(m.constant, Some(1));
        assert!(m.trees.is_empty());
        assert_eq!(m.proba_row(&[9.0]), 1.0);
    }

    #[test]
    fn log_loss_matches_naive_formula() {
        let z = [0.3, -2.0, 4.0];
        let y = [1u8, 0, 0];
        let naive: f64 = z
            .iter()
            .zip(&y)
            .map(|(&z, &y)| {
                let p = sigmoid(z);
                -(f64::from(y) * p.ln() + (1.0 - f64::from(y)) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / 3.0;
        assert!((log_loss(&z, &y) - naive).abs() < 1e-12);
    }
}
