//! Linear support vector classifier.
//!
//! Minimizes `1/2 ||w||^2 + C * sum_i max(0, 1 - y_i (w . x_i + b))` over
//! standardized columns with labels mapped to `{-1, +1}`, using full-batch
//! projected subgradient descent. The step at iteration `t` starts at
//! `1 / (C t)` and is halved until the objective does not increase, so the
//! accepted iterates have a non-increasing objective. Iterates are projected
//! onto the ball `||w|| <= sqrt(2 C n)`, which contains the minimizer because
//! the objective at the origin is `C n`.

use serde::{Deserialize, Serialize};

/// Per-column mean and scale. Constant columns get scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let n = rows.len() as f64;
        let d = rows[0].len();
        let mut means = vec![0.0; d];
        for row in rows {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut scales = vec![0.0; d];
        for row in rows {
            for ((s, v), m) in scales.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut scales {
            *s = (*s / n).sqrt();
            if *s == 0.0 || !s.is_finite() {
                *s = 1.0;
            }
        }
        Standardizer { means, scales }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.means)
            .zip(&self.scales)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvcModel {
    /// Weights on the standardized scale.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub scaler: Standardizer,
}

/// Objective value after initialization and after every accepted step.
#[derive(Debug, Clone, Default)]
pub struct SvcTrace {
    pub objectives: Vec<f64>,
}

impl LinearSvcModel {
    pub fn decision_value(&self, row: &[f64]) -> f64 {
        dot(&self.weights, &self.scaler.transform(row)) + self.bias
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        u8::from(self.decision_value(row) >= 0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Regularized hinge objective for labels `ys` in `{-1, +1}`.
pub fn hinge_objective(weights: &[f64], bias: f64, xs: &[Vec<f64>], ys: &[f64], c: f64) -> f64 {
    let reg = 0.5 * dot(weights, weights);
    let loss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (1.0 - y * (dot(weights, x) + bias)).max(0.0))
        .sum();
    reg + c * loss
}

/// A subgradient of [`hinge_objective`]; the gradient wherever no margin
/// equals exactly 1. Points on the kink contribute nothing.
pub fn hinge_subgradient(
    weights: &[f64],
    bias: f64,
    xs: &[Vec<f64>],
    ys: &[f64],
    c: f64,
) -> (Vec<f64>, f64) {
    let mut grad_w = weights.to_vec();
    let mut grad_b = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        if y * (dot(weights, x) + bias) < 1.0 {
            for (g, v) in grad_w.iter_mut().zip(x) {
                *g -= c * y * v;
            }
            grad_b -= c * y;
        }
    }
    (grad_w, grad_b)
}

const MAX_HALVINGS: usize = 50;

pub(super) fn fit(rows: &[Vec<f64>], labels: &[u8], c: f64, max_iter: usize) -> LinearSvcModel {
    fit_traced(rows, labels, c, max_iter).0
}

/// Trains and returns the objective trace alongside the model.
pub fn fit_traced(
    rows: &[Vec<f64>],
    labels: &[u8],
    c: f64,
    max_iter: usize,
) -> (LinearSvcModel, SvcTrace) {
    let scaler = Standardizer::fit(rows);
    let xs: Vec<Vec<f64>> = rows.iter().map(|r| scaler.transform(r)).collect();
    let ys: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let d = scaler.means.len();
    let radius = (2.0 * c * xs.len() as f64).sqrt();

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut f = hinge_objective(&w, b, &xs, &ys, c);
    let mut trace = SvcTrace {
        objectives: vec![f],
    };

    for t in 1..=max_iter {
        let (gw, gb) = hinge_subgradient(&w, b, &xs, &ys, c);
        if gb == 0.0 && gw.iter().all(|&g| g == 0.0) {
            break;
        }
        let mut step = 1.0 / (c * t as f64);
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut w_next: Vec<f64> = w.iter().zip(&gw).map(|(wi, gi)| wi - step * gi).collect();
            let norm = dot(&w_next, &w_next).sqrt();
            if norm > radius {
                w_next.iter_mut().for_each(|v| *v *= radius / norm);
            }
            let b_next = b - step * gb;
            let f_next = hinge_objective(&w_next, b_next, &xs, &ys, c);
            if f_next <= f {
                accepted = Some((w_next, b_next, f_next));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((w_next, b_next, f_next)) => {
                w = w_next;
                b = b_next;
                f = f_next;
                trace.objectives.push(f);
            }
            None => break,
        }
    }

    (
        LinearSvcModel {
            weights: w,
            bias: b,
            scaler,
        },
        trace,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_clusters_are_fit_perfectly() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let jitter = i as f64 * 0.005;
            rows.push(vec![0.1 + jitter, 0.1 - jitter]);
            labels.push(0);
            rows.push(vec![0.9 - jitter, 0.9 + jitter]);
            labels.push(1);
        }
        let (model, trace) = fit_traced(&rows, &labels, 1.0, 2000);
        let acc = rows
            .iter()
            .zip(&labels)
            .filter(|(r, &l)| model.predict_row(r) == l)
            .count();
        assert_eq!(acc, rows.len());
        assert!(trace.objectives.windows(2).all(|p| p[1] <= p[0]));
        assert!(trace.objectives.last().unwrap() < &trace.objectives[0]);
    }

    #[test]
    fn standardizer_handles_constant_columns() {
        let s = Standardizer::fit(&[vec![1.0, 2.0], vec![1.0, 4.0]]);
        assert_eq!(s.means, vec![1.0, 3.0]);
        assert_eq!(s.scales, vec![1.0, 1.0]);
        assert_eq!(s.transform(&[1.0, 4.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn zero_decision_value_maps_to_class_one() {
        let model = LinearSvcModel {
            weights: vec![1.0],
            bias: 0.0,
            scaler: Standardizer {
                means: vec![0.0],
                scales: vec![1.0],
            },
        };
        assert_eq!(model.predict_row(&[0.0]), 1);
        assert_eq!(model.predict_row(&[-1e-12]), 0);
    }
}
