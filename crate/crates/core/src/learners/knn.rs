use serde::{Deserialize, Serialize};

use super::params::{KnnParams, Metric, Weighting};
use super::LearnError;

/// Brute-force nearest-neighbour classifier. Distance ties go to the lower
/// training row; a class tie in the vote goes to class 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub params: KnnParams,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl Knn {
    pub fn fit(rows: &[Vec<f64>], labels: &[u8], params: &KnnParams) -> Result<Self, LearnError> {
        if rows.is_empty() {
            return Err(LearnError::EmptyTrainingSet);
        }
        if params.n_neighbors > rows.len() {
            return Err(LearnError::BadParam {
                name: "n_neighbors".into(),
                message: format!("{} neighbours requested but only {} training rows", params.n_neighbors, rows.len()),
            });
        }
        Ok(Self {
            params: *params,
            rows: rows.to_vec(),
            labels: labels.to_vec(),
        })
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.params.metric {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }

    /// Indices of the `n_neighbors` nearest training rows with their distances.
    pub fn neighbours(&self, query: &[f64]) -> Vec<(usize, f64)> {
        let mut d: Vec<(usize, f64)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (i, self.distance(query, r)))
            .collect();
        let k = self.params.n_neighbors;
        let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        d
    }

    /// Positive-class score: fraction (or distance-weighted share) of
    /// positive neighbours.
    pub fn proba_row(&self, query: &[f64]) -> f64 {
        let nb = self.neighbours(query);
        match self.params.weights {
            Weighting::Uniform => {
                nb.iter().filter(|(i, _)| self.labels[*i] == 1).count() as f64 / nb.len() as f64
            }
            Weighting::Distance => {
                let exact: Vec<&(usize, f64)> = nb.iter().filter(|(_, d)| *d == 0.0).collect();
                if !exact.is_empty() {
                    return exact.iter().filter(|(i, _)| self.labels[*i] == 1).count() as f64 / exact.len() as f64;
                }
                let (mut pos, mut total) = (0.0, 0.0);
                for &(i, d) in &nb {
                    let w = 1.0 / d;
                    total += w;
                    if self.labels[i] == 1 {
                        pos += w;
                    }
                }
                pos / total
            }
        }
    }

    pub fn predict_row(&self, query: &[f64]) -> u8 {
        u8::from(self.proba_row(query) > 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(k: usize) -> KnnParams {
        KnnParams {
            n_neighbors: k,
            weights: Weighting::Uniform,
            metric: Metric::Euclidean,
        }
    }

    #[test]
    fn exact_match_with_one_neighbour() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let m = Knn::fit(&rows, &[0, 1], &uniform(1)).unwrap();
        assert_eq!(m.predict_row(&[1.0, 1.0]), 1);
        assert_eq!(m.proba_row(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn majority_of_three() {
        let rows = vec![vec![0.0], vec![0.1], vec![0.2], vec![5.0]];
        let m = Knn::fit(&rows, &[1, 1, 0, 0], &uniform(3)).unwrap();
        assert_eq!(m.predict_row(&[0.05]), 1);
        assert!((m.proba_row(&[0.05]) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ties_break_towards_lower_index_and_class_zero() {
        // both training points are equidistant from the query
        let rows = vec![vec![-1.0], vec![1.0]];
        let m = Knn::fit(&rows, &[1, 0], &uniform(1)).unwrap();
        assert_eq!(m.neighbours(&[0.0])[0].0, 0);
        assert_eq!(m.predict_row(&[0.0]), 1);
        let m = Knn::fit(&rows, &[1, 0], &uniform(2)).unwrap();
        assert_eq!(m.predict_row(&[0.0]), 0);
    }

    #[test]
    fn too_many_neighbours_is_an_error() {
        assert!(Knn::fit(&[vec![0.0]], &[0], &uniform(2)).is_err());
        assert!(matches!(Knn::fit(&[], &[], &uniform(1)), Err(LearnError::EmptyTrainingSet)));
    }

    #[test]
    fn distance_weighting() {
        let rows = vec![vec![0.0], vec![3.0]];
        let p = KnnParams {
            n_neighbors: 2,
            weights: Weighting::Distance,
            metric: Metric::Euclidean,
        };
        let m = Knn::fit(&rows, &[1, 0], &p).unwrap();
        // weights 1/1 and 1/2
        assert!((m.proba_row(&[1.0]) - (1.0 / 1.5)).abs() < 1e-15);
        assert_eq!(m.proba_row(&[3.0]), 0.0);
    }
}
