//! Ridge correlation screening and wrapper feature selection.
//!
//! The screen is a per-feature report only. The wrappers score candidate
//! subsets by mean ordered k-fold accuracy of the downstream classifier.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{decision_weights, ClassifierSpec};
use crate::error::{Error, Result};
use crate::eval::{cross_validate, cross_validate_models, CvScheme};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenEntry {
    pub name: String,
    pub coefficient: f64,
    pub abs_coefficient: f64,
    pub in_band: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub lambda: f64,
    pub lower: f64,
    pub upper: f64,
    pub entries: Vec<ScreenEntry>,
}

/// Univariate ridge coefficient of each standardized column against the
/// 0/1 labels: `b = (x . y) / (x . x + lambda)`. Constant columns get 0.
pub fn ridge_screen(matrix: &FeatureMatrix, lambda: f64, lower: f64, upper: f64) -> Result<ScreenReport> {
    let labels = matrix.labels()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("ridge lambda must be positive, got {lambda}")));
    }
    if lower > upper {
        return Err(Error::param(format!("screen band [{lower}, {upper}] is empty")));
    }
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let entries = (0..matrix.n_cols())
        .map(|j| {
            let coefficient = standardize(&matrix.column(j))
                .map(|x| {
                    let xy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
                    let xx: f64 = x.iter().map(|a| a * a).sum();
                    xy / (xx + lambda)
                })
                .unwrap_or(0.0);
            let abs_coefficient = coefficient.abs();
            ScreenEntry {
                name: matrix.names[j].clone(),
                coefficient,
                abs_coefficient,
                in_band: lower <= abs_coefficient && abs_coefficient <= upper,
            }
        })
        .collect();
    Ok(ScreenReport {
        lambda,
        lower,
        upper,
        entries,
    })
}

/// Zero-mean, unit-variance copy; `None` for constant or empty columns.
fn standardize(column: &[f64]) -> Option<Vec<f64>> {
    if column.is_empty() {
        return None;
    }
    let n = column.len() as f64;
    let mean = column.iter().sum::<f64>() / n;
    let std = (column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    (std > 0.0).then(|| column.iter().map(|v| (v - mean) / std).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub size: usize,
    pub score: f64,
}

/// Selected column indices (ascending) with the mean CV accuracy they reach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSubset {
    pub indices: Vec<usize>,
    pub names: Vec<String>,
    pub score: f64,
    pub history: Vec<HistoryEntry>,
}

impl FeatureSubset {
    fn new(matrix: &FeatureMatrix, mut indices: Vec<usize>, score: f64, history: Vec<HistoryEntry>) -> Self {
        indices.sort_unstable();
        FeatureSubset {
            names: indices.iter().map(|&i| matrix.names[i].clone()).collect(),
            indices,
            score,
            history,
        }
    }

    /// Every column of `matrix`, scored.
    pub fn all(matrix: &FeatureMatrix, score: f64) -> Self {
        let indices: Vec<usize> = (0..matrix.n_cols()).collect();
        let history = vec![HistoryEntry {
            size: indices.len(),
            score,
        }];
        Self::new(matrix, indices, score, history)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let subset: FeatureSubset = serde_json::from_str(text)?;
        if subset.indices.is_empty() || subset.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("subset indices must be non-empty and strictly increasing"));
        }
        Ok(subset)
    }
}

/// Mean CV accuracy of `spec` trained on `columns`.
pub fn subset_score(
    matrix: &FeatureMatrix,
    spec: &ClassifierSpec,
    columns: &[usize],
    scheme: &CvScheme,
) -> Result<f64> {
    let view = matrix.select_columns(columns)?;
    Ok(cross_validate(spec, &view, scheme)?.mean_accuracy)
}

/// First index of the maximum score, so ties keep the earliest candidate.
fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Greedy forward or backward selection down (or up) to `k_target` columns.
///
/// Forward adds the column whose inclusion scores best; backward removes the
/// column whose removal leaves the best-scoring subset. Ties go to the lowest
/// column index.
pub fn sequential_select(
    matrix: &FeatureMatrix,
    spec: &ClassifierSpec,
    k_target: usize,
    direction: Direction,
    scheme: &CvScheme,
) -> Result<FeatureSubset> {
    matrix.labels()?;
    let d = matrix.n_cols();
    if k_target < 1 || k_target > d {
        return Err(Error::param(format!("k_target = {k_target} is outside [1, {d}]")));
    }
    if scheme.folds < 2 {
        return Err(Error::param("sequential selection needs at least 2 folds"));
    }

    let mut history = Vec::new();
    let (mut current, mut score) = match direction {
        Direction::Forward => (Vec::new(), f64::NAN),
        Direction::Backward => {
            let all: Vec<usize> = (0..d).collect();
            let s = subset_score(matrix, spec, &all, scheme)?;
            history.push(HistoryEntry { size: d, score: s });
            (all, s)
        }
    };

    while current.len() != k_target {
        // Candidates in ascending column order.
        let candidates: Vec<usize> = match direction {
            Direction::Forward => (0..d).filter(|c| !current.contains(c)).collect(),
            Direction::Backward => current.clone(),
        };
        let scores = candidates
            .par_iter()
            .map(|&c| {
                let trial: Vec<usize> = match direction {
                    Direction::Forward => {
                        let mut t = current.clone();
                        t.push(c);
                        t.sort_unstable();
                        t
                    }
                    Direction::Backward => current.iter().copied().filter(|&x| x != c).collect(),
                };
                subset_score(matrix, spec, &trial, scheme)
            })
            .collect::<Result<Vec<f64>>>()?;
        let best = argmax_first(&scores);
        match direction {
            Direction::Forward => {
                current.push(candidates[best]);
                current.sort_unstable();
            }
            Direction::Backward => current.retain(|&x| x != candidates[best]),
        }
        score = scores[best];
        history.push(HistoryEntry {
            size: current.len(),
            score,
        });
    }

    Ok(FeatureSubset::new(matrix, current, score, history))
}

/// Recursive feature elimination with cross-validation.
///
/// Starting from every column, records the mean CV accuracy of the current
/// subset, then drops the column with the smallest mean absolute weight
/// across the fold models (ties drop the lowest index), down to `k_min`
/// columns. Returns the smallest subset reaching the best recorded score.
pub fn rfecv_select(
    matrix: &FeatureMatrix,
    spec: &ClassifierSpec,
    k_min: usize,
    scheme: &CvScheme,
) -> Result<FeatureSubset> {
    if !spec.is_linear() {
        return Err(Error::NoLinearWeights(spec.family.name()));
    }
    matrix.labels()?;
    let d = matrix.n_cols();
    if k_min < 1 || k_min > d {
        return Err(Error::param(format!("k_min = {k_min} is outside [1, {d}]")));
    }

    let mut current: Vec<usize> = (0..d).collect();
    let mut history = Vec::new();
    let mut subsets = Vec::new();
    loop {
        let view = matrix.select_columns(&current)?;
        let (cv, models) = cross_validate_models(spec, &view, scheme)?;
        history.push(HistoryEntry {
            size: current.len(),
            score: cv.mean_accuracy,
        });
        subsets.push(current.clone());
        if current.len() == k_min {
            break;
        }
        let mut importance = vec![0.0; current.len()];
        for model in &models {
            for (acc, w) in importance.iter_mut().zip(decision_weights(model)?) {
                *acc += w;
            }
        }
        let weakest = (1..importance.len()).fold(0, |best, i| {
            if importance[i] < importance[best] {
                i
            } else {
                best
            }
        });
        current.remove(weakest);
    }

    let best_score = history
        .iter()
        .map(|h| h.score)
        .fold(f64::NEG_INFINITY, f64::max);
    // History runs from largest to smallest subset; take the last maximum.
    let pick = history
        .iter()
        .rposition(|h| h.score == best_score)
        .unwrap_or(0);
    Ok(FeatureSubset::new(
        matrix,
        subsets.swap_remove(pick),
        best_score,
        history,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::Family;

    fn matrix(names: &[&str], rows: Vec<Vec<f64>>, labels: Vec<u8>) -> FeatureMatrix {
        FeatureMatrix::new(names.iter().map(|s| s.to_string()).collect(), rows, Some(labels)).unwrap()
    }

    #[test]
    fn screen_constant_feature_is_zero() {
        let m = matrix(&["c", "y"], vec![vec![0.3, 0.0], vec![0.3, 0.0], vec![0.3, 1.0], vec![0.3, 1.0]], vec![0, 0, 1, 1]);
        let r = ridge_screen(&m, 1.0, 0.2, 2.0).unwrap();
        assert_eq!(r.entries[0].coefficient, 0.0);
        assert!(!r.entries[0].in_band);
    }

    #[test]
    fn screen_label_copy_approaches_half() {
        let m = matrix(&["y"], vec![vec![0.0], vec![0.0], vec![1.0], vec![1.0]], vec![0, 0, 1, 1]);
        // Standardized column is (-1, -1, 1, 1): x.y = 2, x.x = 4.
        let r = ridge_screen(&m, 1e-12, 0.2, 2.0).unwrap();
        assert!((r.entries[0].coefficient - 0.5).abs() < 1e-9);
        assert!(r.entries[0].in_band);
        let r = ridge_screen(&m, 1.0, 0.2, 2.0).unwrap();
        assert!((r.entries[0].coefficient - 2.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn screen_band_is_inclusive() {
        let m = matrix(&["y"], vec![vec![0.0], vec![0.0], vec![1.0], vec![1.0]], vec![0, 0, 1, 1]);
        let r = ridge_screen(&m, 1e-12, 0.2, 0.5 - 1e-9).unwrap();
        assert!(!r.entries[0].in_band);
        let r = ridge_screen(&m, 6.0, 0.2, 2.0).unwrap();
        assert_eq!(r.entries[0].coefficient, 0.2);
        assert!(r.entries[0].in_band);
        assert!(ridge_screen(&m, 0.0, 0.2, 2.0).is_err());
        let unlabeled = FeatureMatrix { labels: None, ..m };
        assert!(matches!(ridge_screen(&unlabeled, 1.0, 0.2, 2.0), Err(Error::Unlabeled)));
    }

    fn planted(n: usize, d: usize) -> FeatureMatrix {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..d)
                    .map(|j| ((i * (7 + 3 * j) + 11 * j) % 17) as f64 / 17.0)
                    .collect()
            })
            .collect();
        let labels = rows.iter().map(|r| u8::from(r[0] > 0.5)).collect();
        let names: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
        FeatureMatrix::new(names, rows, Some(labels)).unwrap()
    }

    #[test]
    fn forward_exhaustion_selects_all() {
        let m = planted(30, 4);
        let spec = ClassifierSpec::new(Family::gaussian_nb(), 0);
        let s = sequential_select(&m, &spec, 4, Direction::Forward, &CvScheme::ordered(3)).unwrap();
        assert_eq!(s.indices, vec![0, 1, 2, 3]);
        assert_eq!(s.history.len(), 4);
    }

    #[test]
    fn backward_reaches_target() {
        let m = planted(45, 4);
        let spec = ClassifierSpec::new(Family::decision_tree(), 0);
        let s = sequential_select(&m, &spec, 1, Direction::Backward, &CvScheme::ordered(3)).unwrap();
        assert_eq!(s.indices.len(), 1);
        assert_eq!(s.score, subset_score(&m, &spec, &s.indices, &CvScheme::ordered(3)).unwrap());
        assert_eq!(s.history.first().unwrap().size, 4);
        assert_eq!(s.history.last().unwrap().size, 1);
    }

    #[test]
    fn selector_argument_errors() {
        let m = planted(30, 3);
        let spec = ClassifierSpec::new(Family::gaussian_nb(), 0);
        let scheme = CvScheme::ordered(3);
        assert!(sequential_select(&m, &spec, 0, Direction::Forward, &scheme).is_err());
        assert!(sequential_select(&m, &spec, 4, Direction::Forward, &scheme).is_err());
        assert!(matches!(
            rfecv_select(&m, &spec, 1, &scheme),
            Err(Error::NoLinearWeights("gaussian_nb"))
        ));
        let svc = ClassifierSpec::new(Family::linear_svc(), 0);
        assert!(rfecv_select(&m, &svc, 0, &scheme).is_err());
    }

    #[test]
    fn rfecv_identity_when_k_min_is_width() {
        let m = planted(30, 3);
        let svc = ClassifierSpec::new(Family::linear_svc(), 0);
        let s = rfecv_select(&m, &svc, 3, &CvScheme::ordered(3)).unwrap();
        assert_eq!(s.indices, vec![0, 1, 2]);
        assert_eq!(s.history.len(), 1);
    }

    #[test]
    fn subset_json_validation() {
        let m = planted(10, 3);
        let s = FeatureSubset::all(&m, 0.5);
        let back = FeatureSubset::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(FeatureSubset::from_json(r#"{"indices": [2, 1], "names": [], "score": 0.0, "history": []}"#).is_err());
    }
}
