use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kfold::kfold_split;
use super::metrics::ConfusionMatrix;
use crate::classifiers::{predict, train, ClassifierSpec, TrainedModel};
use crate::dataset::balanced_indices;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// How cross-validation folds are formed and treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvScheme {
    pub folds: usize,
    /// When set, each training complement is undersampled to equal class
    /// counts with seed `seed + fold` before fitting. Test folds are untouched.
    pub fold_balance_seed: Option<u64>,
}

impl CvScheme {
    pub fn ordered(folds: usize) -> Self {
        CvScheme {
            folds,
            fold_balance_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub test_start: usize,
    pub test_end: usize,
    pub train_rows: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub f1_macro: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldScore>,
    pub mean_accuracy: f64,
    /// Mean positive-class F1.
    pub mean_f1: f64,
    pub mean_f1_macro: f64,
    pub confusion: ConfusionMatrix,
}

/// Ordered k-fold cross-validation: train on each complement, score on the
/// held-out fold, average unweighted over folds.
pub fn cross_val_score(spec: &ClassifierSpec, matrix: &FeatureMatrix, k: usize) -> Result<CvResult> {
    cross_validate(spec, matrix, &CvScheme::ordered(k))
}

pub fn cross_validate(spec: &ClassifierSpec, matrix: &FeatureMatrix, scheme: &CvScheme) -> Result<CvResult> {
    cross_validate_models(spec, matrix, scheme).map(|(result, _)| result)
}

/// As [`cross_validate`], also returning the model fitted in each fold.
pub fn cross_validate_models(
    spec: &ClassifierSpec,
    matrix: &FeatureMatrix,
    scheme: &CvScheme,
) -> Result<(CvResult, Vec<TrainedModel>)> {
    let labels = matrix.labels()?;
    if let Some(&first) = labels.first() {
        if labels.iter().all(|&l| l == first) {
            return Err(Error::SingleClass(first));
        }
    }
    let plan = kfold_split(matrix.n_rows(), scheme.folds)?;
    let outcomes = (0..plan.k())
        .into_par_iter()
        .map(|fold| {
            run_fold(spec, matrix, &plan.train_indices(fold), &plan.test_indices(fold), fold, scheme)
                .map_err(|e| Error::Fold {
                    fold,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;

    let (folds, models): (Vec<FoldScore>, Vec<TrainedModel>) = outcomes.into_iter().unzip();
    let k = folds.len() as f64;
    let confusion = folds
        .iter()
        .fold(ConfusionMatrix::default(), |acc, f| acc.merge(&f.confusion));
    let result = CvResult {
        mean_accuracy: folds.iter().map(|f| f.accuracy).sum::<f64>() / k,
        mean_f1: folds.iter().map(|f| f.f1).sum::<f64>() / k,
        mean_f1_macro: folds.iter().map(|f| f.f1_macro).sum::<f64>() / k,
        confusion,
        folds,
    };
    Ok((result, models))
}

fn run_fold(
    spec: &ClassifierSpec,
    matrix: &FeatureMatrix,
    train_idx: &[usize],
    test_idx: &[usize],
    fold: usize,
    scheme: &CvScheme,
) -> Result<(FoldScore, TrainedModel)> {
    let mut train_part = matrix.select_rows(train_idx);
    if let Some(seed) = scheme.fold_balance_seed {
        let keep = balanced_indices(train_part.labels()?, seed.wrapping_add(fold as u64))?;
        train_part = train_part.select_rows(&keep);
    }
    let test_part = matrix.select_rows(test_idx);
    let model = train(spec, &train_part)?;
    let pred = predict(&model, &test_part)?;
    let confusion = ConfusionMatrix::from_predictions(&pred, test_part.labels()?)?;
    let score = FoldScore {
        fold,
        test_start: test_idx[0],
        test_end: test_idx[test_idx.len() - 1] + 1,
        train_rows: train_part.n_rows(),
        accuracy: confusion.accuracy(),
        f1: confusion.f1_positive(),
        f1_macro: confusion.f1(super::F1Mode::Macro),
        confusion,
    };
    Ok((score, model))
}
