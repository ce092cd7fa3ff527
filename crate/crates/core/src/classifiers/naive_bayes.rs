use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Gaussian naive Bayes. Index 0 of each per-class vector is class 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbModel {
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    /// Population variances, floored at `var_floor`.
    pub variances: [Vec<f64>; 2],
    pub var_floor: f64,
}

impl GaussianNbModel {
    pub(super) fn fit(rows: &[Vec<f64>], labels: &[u8], var_floor: f64) -> Self {
        let d = rows[0].len();
        let mut counts = [0usize; 2];
        let mut means = [vec![0.0; d], vec![0.0; d]];
        for (row, &l) in rows.iter().zip(labels) {
            let c = usize::from(l);
            counts[c] += 1;
            for (m, v) in means[c].iter_mut().zip(row) {
                *m += v;
            }
        }
        for c in 0..2 {
            means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
        }
        let mut variances = [vec![0.0; d], vec![0.0; d]];
        for (row, &l) in rows.iter().zip(labels) {
            let c = usize::from(l);
            for ((s, v), m) in variances[c].iter_mut().zip(row).zip(&means[c]) {
                *s += (v - m) * (v - m);
            }
        }
        for c in 0..2 {
            variances[c]
                .iter_mut()
                .for_each(|s| *s = (*s / counts[c] as f64).max(var_floor));
        }
        let n = rows.len() as f64;
        GaussianNbModel {
            priors: [counts[0] as f64 / n, counts[1] as f64 / n],
            means,
            variances,
            var_floor,
        }
    }

    /// Unnormalized log posterior per class: log prior plus summed log densities.
    pub fn joint_log_likelihood(&self, row: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (c, slot) in out.iter_mut().enumerate() {
            *slot = self.priors[c].ln()
                + row
                    .iter()
                    .zip(&self.means[c])
                    .zip(&self.variances[c])
                    .map(|((x, m), v)| -0.5 * (2.0 * PI * v).ln() - (x - m) * (x - m) / (2.0 * v))
                    .sum::<f64>();
        }
        out
    }

    /// Normalized class posteriors.
    pub fn posterior(&self, row: &[f64]) -> [f64; 2] {
        let jll = self.joint_log_likelihood(row);
        let top = jll[0].max(jll[1]);
        let e = [(jll[0] - top).exp(), (jll[1] - top).exp()];
        let z = e[0] + e[1];
        [e[0] / z, e[1] / z]
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let jll = self.joint_log_likelihood(row);
        u8::from(jll[1] > jll[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameters_match_hand_computation() {
        let rows = vec![vec![1.0, 10.0], vec![3.0, 14.0], vec![6.0, 0.0], vec![8.0, 2.0]];
        let model = GaussianNbModel::fit(&rows, &[0, 0, 1, 1], 1e-9);
        assert_eq!(model.priors, [0.5, 0.5]);
        assert_eq!(model.means[0], vec![2.0, 12.0]);
        assert_eq!(model.means[1], vec![7.0, 1.0]);
        assert_eq!(model.variances[0], vec![1.0, 4.0]);
        assert_eq!(model.variances[1], vec![1.0, 1.0]);
    }

    #[test]
    fn variance_floor_applies_to_constant_features() {
        let rows = vec![vec![1.0], vec![1.0], vec![2.0]];
        let model = GaussianNbModel::fit(&rows, &[0, 0, 1], 1e-6);
        assert_eq!(model.variances[0], vec![1e-6]);
        assert_eq!(model.variances[1], vec![1e-6]);
        assert!((model.priors[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_posterior_breaks_toward_zero() {
        let model = GaussianNbModel {
            priors: [0.5, 0.5],
            means: [vec![0.2], vec![0.8]],
            variances: [vec![0.01], vec![0.01]],
            var_floor: 1e-9,
        };
        assert_eq!(model.predict_row(&[0.5]), 0);
        assert_eq!(model.predict_row(&[0.6]), 1);
        let p = model.posterior(&[0.5]);
        assert!((p[0] - 0.5).abs() < 1e-9);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }
}
