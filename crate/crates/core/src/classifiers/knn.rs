use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// k-nearest-neighbour classifier over raw (unscaled) features.
///
/// Neighbours are ranked by Euclidean distance, equal distances by training
/// row order. Vote ties go to the class with the smaller summed distance,
/// then to class 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub n_features: usize,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl KnnModel {
    pub(super) fn fit(rows: &[Vec<f64>], labels: &[u8], k: usize) -> Self {
        KnnModel {
            k,
            n_features: rows[0].len(),
            rows: rows.to_vec(),
            labels: labels.to_vec(),
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let mut dists: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (euclidean(r, row), i))
            .collect();
        let k = self.k.min(dists.len());
        let by_rank = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, by_rank);
        }
        let mut votes = [0usize; 2];
        let mut dist_sum = [0.0f64; 2];
        for &(d, i) in &dists[..k] {
            let class = usize::from(self.labels[i]);
            votes[class] += 1;
            dist_sum[class] += d;
        }
        match votes[1].cmp(&votes[0]) {
            Ordering::Greater => 1,
            Ordering::Less => 0,
            Ordering::Equal => u8::from(dist_sum[1] < dist_sum[0]),
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_nn_reproduces_training_labels() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 * 0.1, (i * 7 % 5) as f64]).collect();
        let labels: Vec<u8> = (0..12).map(|i| (i * 5 % 3 == 0) as u8).collect();
        let model = KnnModel::fit(&rows, &labels, 1);
        for (r, &l) in rows.iter().zip(&labels) {
            assert_eq!(model.predict_row(r), l);
        }
    }

    #[test]
    fn vote_tie_prefers_closer_class_then_zero() {
        // k = 3 but only two stored rows: one vote each.
        let model = KnnModel::fit(&[vec![0.0], vec![1.0]], &[0, 1], 3);
        assert_eq!(model.predict_row(&[0.8]), 1);
        assert_eq!(model.predict_row(&[0.2]), 0);
        assert_eq!(model.predict_row(&[0.5]), 0);
    }

    #[test]
    fn single_class_training_is_allowed() {
        let model = KnnModel::fit(&[vec![0.0], vec![1.0]], &[1, 1], 1);
        assert_eq!(model.predict_row(&[-5.0]), 1);
    }
}
