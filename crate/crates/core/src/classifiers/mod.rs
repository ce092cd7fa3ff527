//! Binary classifiers behind one train/predict interface.
//!
//! Families: linear SVC trained by subgradient descent on the hinge loss,
//! k-nearest neighbours, Gaussian naive Bayes, a CART decision tree and a
//! bagged random forest. Ties resolve toward class 0 everywhere.

mod forest;
mod knn;
pub mod linear_svc;
mod naive_bayes;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub use forest::{ForestModel, MaxFeatures};
pub use knn::KnnModel;
pub use linear_svc::{hinge_objective, hinge_subgradient, LinearSvcModel, Standardizer, SvcTrace};
pub use naive_bayes::GaussianNbModel;
pub use tree::{Node, TreeModel, TreeParams};

/// Version tag written into serialized model documents.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Classifier family plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    LinearSvc {
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
    },
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    GaussianNb {
        #[serde(default = "default_var_floor")]
        var_floor: f64,
    },
    DecisionTree {
        #[serde(default = "default_min_samples_split")]
        min_samples_split: usize,
        #[serde(default)]
        max_depth: Option<usize>,
    },
    RandomForest {
        #[serde(default = "default_trees")]
        n_trees: usize,
        #[serde(default = "default_min_samples_split")]
        min_samples_split: usize,
        #[serde(default)]
        max_depth: Option<usize>,
        #[serde(default = "default_true")]
        bootstrap: bool,
        #[serde(default)]
        max_features: MaxFeatures,
    },
}

fn default_c() -> f64 {
    1.0
}
fn default_max_iter() -> usize {
    2000
}
fn default_k() -> usize {
    5
}
fn default_var_floor() -> f64 {
    1e-9
}
fn default_min_samples_split() -> usize {
    2
}
fn default_trees() -> usize {
    100
}
fn default_true() -> bool {
    true
}

impl Family {
    pub fn linear_svc() -> Self {
        Family::LinearSvc {
            c: default_c(),
            max_iter: default_max_iter(),
        }
    }

    pub fn knn(k: usize) -> Self {
        Family::Knn { k }
    }

    pub fn gaussian_nb() -> Self {
        Family::GaussianNb {
            var_floor: default_var_floor(),
        }
    }

    pub fn decision_tree() -> Self {
        Family::DecisionTree {
            min_samples_split: default_min_samples_split(),
            max_depth: None,
        }
    }

    pub fn random_forest() -> Self {
        Family::RandomForest {
            n_trees: default_trees(),
            min_samples_split: default_min_samples_split(),
            max_depth: None,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::LinearSvc { .. } => "linear_svc",
            Family::Knn { .. } => "knn",
            Family::GaussianNb { .. } => "gaussian_nb",
            Family::DecisionTree { .. } => "decision_tree",
            Family::RandomForest { .. } => "random_forest",
        }
    }

    /// Row label in summary tables, e.g. `Linear-SVC` or `7-NN`.
    pub fn display_name(&self) -> String {
        match self {
            Family::LinearSvc { .. } => "Linear-SVC".into(),
            Family::Knn { k } => format!("{k}-NN"),
            Family::GaussianNb { .. } => "NB".into(),
            Family::DecisionTree { .. } => "Decision Tree".into(),
            Family::RandomForest { .. } => "Random Forest".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default)]
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        ClassifierSpec { family, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::param(msg));
        match self.family {
            Family::LinearSvc { c, max_iter } => {
                if !(c > 0.0 && c.is_finite()) {
                    return bad(format!("linear_svc C must be positive, got {c}"));
                }
                if max_iter == 0 {
                    return bad("linear_svc max_iter must be at least 1".into());
                }
            }
            Family::Knn { k } => {
                if k == 0 || k % 2 == 0 {
                    return bad(format!("knn k must be odd and at least 1, got {k}"));
                }
            }
            Family::GaussianNb { var_floor } => {
                if !(var_floor > 0.0 && var_floor.is_finite()) {
                    return bad(format!("gaussian_nb var_floor must be positive, got {var_floor}"));
                }
            }
            Family::DecisionTree {
                min_samples_split, ..
            } => {
                if min_samples_split < 2 {
                    return bad("min_samples_split must be at least 2".into());
                }
            }
            Family::RandomForest {
                n_trees,
                min_samples_split,
                ..
            } => {
                if n_trees == 0 {
                    return bad("random_forest needs at least 1 tree".into());
                }
                if min_samples_split < 2 {
                    return bad("min_samples_split must be at least 2".into());
                }
            }
        }
        Ok(())
    }

    /// Whether trained models expose per-feature weights.
    pub fn is_linear(&self) -> bool {
        matches!(self.family, Family::LinearSvc { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TrainedModel {
    LinearSvc(LinearSvcModel),
    Knn(KnnModel),
    GaussianNb(GaussianNbModel),
    DecisionTree(TreeModel),
    RandomForest(ForestModel),
}

impl TrainedModel {
    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::LinearSvc(m) => m.weights.len(),
            TrainedModel::Knn(m) => m.n_features,
            TrainedModel::GaussianNb(m) => m.means[0].len(),
            TrainedModel::DecisionTree(m) => m.n_features,
            TrainedModel::RandomForest(m) => m.n_features,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            TrainedModel::LinearSvc(_) => "linear_svc",
            TrainedModel::Knn(_) => "knn",
            TrainedModel::GaussianNb(_) => "gaussian_nb",
            TrainedModel::DecisionTree(_) => "decision_tree",
            TrainedModel::RandomForest(_) => "random_forest",
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        match self {
            TrainedModel::LinearSvc(m) => m.predict_row(row),
            TrainedModel::Knn(m) => m.predict_row(row),
            TrainedModel::GaussianNb(m) => m.predict_row(row),
            TrainedModel::DecisionTree(m) => m.predict_row(row),
            TrainedModel::RandomForest(m) => m.predict_row(row),
        }
    }
}

/// Validated training view: rows, binary labels, both classes unless
/// `allow_single_class`.
fn training_data(matrix: &FeatureMatrix, allow_single_class: bool) -> Result<(&[Vec<f64>], &[u8])> {
    let labels = matrix.labels()?;
    if matrix.n_rows() == 0 {
        return Err(Error::Empty { what: "training matrix" });
    }
    if matrix.n_cols() == 0 {
        return Err(Error::Empty { what: "feature set" });
    }
    matrix.check_finite()?;
    if !allow_single_class {
        if matrix.n_rows() < 2 {
            return Err(Error::param("training needs at least 2 rows"));
        }
        let first = labels[0];
        if labels.iter().all(|&l| l == first) {
            return Err(Error::SingleClass(first));
        }
    }
    Ok((&matrix.rows, labels))
}

pub fn train(spec: &ClassifierSpec, matrix: &FeatureMatrix) -> Result<TrainedModel> {
    spec.validate()?;
    let allow_single = matches!(spec.family, Family::Knn { .. });
    let (rows, labels) = training_data(matrix, allow_single)?;
    Ok(match spec.family {
        Family::LinearSvc { c, max_iter } => {
            TrainedModel::LinearSvc(linear_svc::fit(rows, labels, c, max_iter))
        }
        Family::Knn { k } => TrainedModel::Knn(KnnModel::fit(rows, labels, k)),
        Family::GaussianNb { var_floor } => {
            TrainedModel::GaussianNb(GaussianNbModel::fit(rows, labels, var_floor))
        }
        Family::DecisionTree {
            min_samples_split,
            max_depth,
        } => TrainedModel::DecisionTree(TreeModel::fit(
            rows,
            labels,
            &TreeParams {
                min_samples_split,
                max_depth,
            },
        )),
        Family::RandomForest {
            n_trees,
            min_samples_split,
            max_depth,
            bootstrap,
            max_features,
        } => TrainedModel::RandomForest(ForestModel::fit(
            rows,
            labels,
            &forest::ForestParams {
                n_trees,
                tree: TreeParams {
                    min_samples_split,
                    max_depth,
                },
                bootstrap,
                max_features,
                seed: spec.seed,
            },
        )),
    })
}

pub fn predict(model: &TrainedModel, matrix: &FeatureMatrix) -> Result<Vec<u8>> {
    if matrix.n_cols() != model.n_features() {
        return Err(Error::WidthMismatch {
            expected: model.n_features(),
            found: matrix.n_cols(),
        });
    }
    matrix.check_finite()?;
    Ok(matrix.rows.iter().map(|r| model.predict_row(r)).collect())
}

/// Absolute linear weights on the standardized scale, in column order.
pub fn decision_weights(model: &TrainedModel) -> Result<Vec<f64>> {
    match model {
        TrainedModel::LinearSvc(m) => Ok(m.weights.iter().map(|w| w.abs()).collect()),
        other => Err(Error::NoLinearWeights(other.family_name())),
    }
}

/// Versioned JSON envelope for a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub tool_version: String,
    pub spec: ClassifierSpec,
    /// Column names the model was trained on, in order.
    pub feature_names: Vec<String>,
    /// Label assigned to inputs that cannot be featurized.
    pub fallback_label: u8,
    pub model: TrainedModel,
}

impl ModelDocument {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::param(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        Ok(doc)
    }
}

/// Majority class of `labels`, ties to class 0.
pub fn majority_label(labels: &[u8]) -> u8 {
    let ones = labels.iter().filter(|&&l| l == 1).count();
    u8::from(ones * 2 > labels.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> FeatureMatrix {
        FeatureMatrix::new(
            vec!["a".into(), "b".into()],
            vec![
                vec![0.1, 0.1],
                vec![0.12, 0.08],
                vec![0.9, 0.9],
                vec![0.88, 0.92],
            ],
            Some(vec![0, 0, 1, 1]),
        )
        .unwrap()
    }

    fn all_families() -> Vec<Family> {
        vec![
            Family::linear_svc(),
            Family::knn(1),
            Family::gaussian_nb(),
            Family::decision_tree(),
            Family::RandomForest {
                n_trees: 5,
                min_samples_split: 2,
                max_depth: None,
                bootstrap: false,
                max_features: MaxFeatures::All,
            },
        ]
    }

    #[test]
    fn every_family_fits_separable_toy() {
        let m = toy();
        for family in all_families() {
            let model = train(&ClassifierSpec::new(family.clone(), 0), &m).unwrap();
            assert_eq!(predict(&model, &m).unwrap(), vec![0, 0, 1, 1], "{family:?}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = toy();
        let spec = ClassifierSpec::new(Family::linear_svc(), 0);
        let single = FeatureMatrix {
            labels: Some(vec![1; 4]),
            ..m.clone()
        };
        assert!(matches!(train(&spec, &single), Err(Error::SingleClass(1))));
        assert!(train(&ClassifierSpec::new(Family::knn(1), 0), &single).is_ok());
        let empty = FeatureMatrix::new(m.names.clone(), vec![], Some(vec![])).unwrap();
        assert!(train(&spec, &empty).is_err());
        let mut nan = m.clone();
        nan.rows[1][0] = f64::NAN;
        assert!(matches!(train(&spec, &nan), Err(Error::NonFinite { row: 1, column: 0 })));
        let unlabeled = FeatureMatrix { labels: None, ..m.clone() };
        assert!(matches!(train(&spec, &unlabeled), Err(Error::Unlabeled)));
        assert!(train(&ClassifierSpec::new(Family::knn(4), 0), &m).is_err());
        assert!(train(&ClassifierSpec::new(Family::LinearSvc { c: 0.0, max_iter: 10 }, 0), &m).is_err());
    }

    #[test]
    fn predict_checks_width() {
        let model = train(&ClassifierSpec::new(Family::gaussian_nb(), 0), &toy()).unwrap();
        let narrow = toy().select_columns(&[0]).unwrap();
        assert!(matches!(
            predict(&model, &narrow),
            Err(Error::WidthMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn decision_weights_only_for_linear() {
        let svc = TrainedModel::LinearSvc(LinearSvcModel {
            weights: vec![0.5, -1.2],
            bias: 0.0,
            scaler: Standardizer {
                means: vec![0.0; 2],
                scales: vec![1.0; 2],
            },
        });
        assert_eq!(decision_weights(&svc).unwrap(), vec![0.5, 1.2]);
        let single = TrainedModel::LinearSvc(LinearSvcModel {
            weights: vec![-3.0],
            bias: 1.0,
            scaler: Standardizer {
                means: vec![0.0],
                scales: vec![1.0],
            },
        });
        assert_eq!(decision_weights(&single).unwrap(), vec![3.0]);
        let tree = train(&ClassifierSpec::new(Family::decision_tree(), 0), &toy()).unwrap();
        assert!(matches!(decision_weights(&tree), Err(Error::NoLinearWeights("decision_tree"))));
    }

    #[test]
    fn model_documents_round_trip_exactly() {
        let m = toy();
        for family in all_families() {
            let spec = ClassifierSpec::new(family, 3);
            let model = train(&spec, &m).unwrap();
            let doc = ModelDocument {
                format_version: MODEL_FORMAT_VERSION,
                tool_version: "test".into(),
                spec,
                feature_names: m.names.clone(),
                fallback_label: 0,
                model,
            };
            let back = ModelDocument::from_json(&doc.to_json().unwrap()).unwrap();
            assert_eq!(back, doc);
        }
    }

    #[test]
    fn spec_parses_with_defaults() {
        let spec: ClassifierSpec = serde_json::from_str(r#"{"family": "random_forest", "seed": 4}"#).unwrap();
        assert_eq!(spec, ClassifierSpec::new(Family::random_forest(), 4));
        let spec: ClassifierSpec = serde_json::from_str(r#"{"family": "knn", "k": 7}"#).unwrap();
        assert_eq!(spec.family.display_name(), "7-NN");
    }

    #[test]
    fn majority_ties_to_zero() {
        assert_eq!(majority_label(&[0, 1]), 0);
        assert_eq!(majority_label(&[1, 1, 0]), 1);
        assert_eq!(majority_label(&[]), 0);
    }
}
