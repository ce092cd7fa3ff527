//! End-to-end workflow: load, filter, discretize, balance, extract, screen,
//! select, cross-validate, fit, and optionally predict a test file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cv::{cross_validate, CvResult, CvScheme};
use super::metrics::{ConfusionMatrix, F1Mode};
use crate::classifiers::{
    majority_label, predict, train, ClassifierSpec, Family, ModelDocument, MODEL_FORMAT_VERSION,
};
use crate::dataset::{
    balance_classes, discretize_labels, filter_by_validity, load_dataset, write_predictions, Dataset,
    Schema,
};
use crate::error::{Error, Result};
use crate::features::{extract_matrix, extract_window_features, FeatureMatrix, DEFAULT_LFHF_EPS, FEATURE_NAMES};
use crate::selection::{
    ridge_screen, rfecv_select, sequential_select, Direction, FeatureSubset, ScreenReport,
};

pub const TOOL_VERSION: &str = concat!("stresslab ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    /// Undersample the whole training set once, before any split.
    #[default]
    BeforeSplit,
    /// Undersample each fold's training complement and the final fit data.
    WithinFolds,
    Off,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorKind {
    #[default]
    Sfs,
    Rfecv,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub train: PathBuf,
    pub test: Option<PathBuf>,
    /// Minimum frame validity kept by the filter.
    pub p: f64,
    pub threshold: u32,
    pub seed: u64,
    pub balance: BalanceMode,
    pub eps: f64,
    pub classifier: Family,
    pub selector: SelectorKind,
    /// Target subset size for SFS; minimum size for RFECV.
    pub k_target: usize,
    pub direction: Direction,
    pub folds: usize,
    pub f1_mode: F1Mode,
    pub ridge_lambda: f64,
    pub screen_lower: f64,
    pub screen_upper: f64,
    pub report: Option<PathBuf>,
    pub answer: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            train: PathBuf::new(),
            test: None,
            p: 0.5,
            threshold: 1,
            seed: 42,
            balance: BalanceMode::BeforeSplit,
            eps: DEFAULT_LFHF_EPS,
            classifier: Family::linear_svc(),
            selector: SelectorKind::Sfs,
            k_target: 5,
            direction: Direction::Forward,
            folds: 3,
            f1_mode: F1Mode::Positive,
            ridge_lambda: 1.0,
            screen_lower: 0.2,
            screen_upper: 2.0,
            report: None,
            answer: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn spec(&self) -> ClassifierSpec {
        ClassifierSpec::new(self.classifier.clone(), self.seed)
    }

    pub fn scheme(&self) -> CvScheme {
        CvScheme {
            folds: self.folds,
            fold_balance_seed: (self.balance == BalanceMode::WithinFolds).then_some(self.seed),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub windows_loaded: usize,
    pub frames_loaded: usize,
    pub windows_after_filter: usize,
    pub frames_after_filter: usize,
    /// Windows dropped for keeping fewer than two frames.
    pub windows_too_short: usize,
    pub class_counts: [usize; 2],
    pub windows_used: usize,
    pub class_counts_used: [usize; 2],
}

/// Filters, discretizes and (for [`BalanceMode::BeforeSplit`]) balances a
/// labeled dataset. Windows left with fewer than two frames are dropped.
pub fn prepare_training(
    raw: &Dataset,
    p: f64,
    threshold: u32,
    balance: BalanceMode,
    seed: u64,
) -> Result<(Dataset, DataSummary)> {
    let mut summary = DataSummary {
        windows_loaded: raw.len(),
        frames_loaded: raw.frame_count(),
        ..DataSummary::default()
    };
    let filtered = filter_by_validity(raw, p).map_err(|e| e.in_stage("filter"))?;
    summary.windows_after_filter = filtered.len();
    summary.frames_after_filter = filtered.frame_count();
    let usable = filtered.retain_min_frames(2);
    summary.windows_too_short = filtered.len() - usable.len();
    if usable.is_empty() {
        return Err(Error::EmptyAfterFilter { p }.in_stage("filter"));
    }
    let labeled = discretize_labels(&usable, threshold).map_err(|e| e.in_stage("discretize"))?;
    let (c0, c1) = labeled.class_counts();
    summary.class_counts = [c0, c1];
    let used = match balance {
        BalanceMode::BeforeSplit => {
            balance_classes(&labeled, seed).map_err(|e| e.in_stage("balance"))?
        }
        BalanceMode::WithinFolds | BalanceMode::Off => labeled,
    };
    let (u0, u1) = used.class_counts();
    summary.windows_used = used.len();
    summary.class_counts_used = [u0, u1];
    Ok((used, summary))
}

/// Rows used for the final fit: balanced here when balancing is per fold.
fn final_fit_rows(matrix: &FeatureMatrix, balance: BalanceMode, seed: u64) -> Result<FeatureMatrix> {
    match balance {
        BalanceMode::WithinFolds => {
            let keep = crate::dataset::balanced_indices(matrix.labels()?, seed)?;
            Ok(matrix.select_rows(&keep))
        }
        _ => Ok(matrix.clone()),
    }
}

pub fn select_features(
    matrix: &FeatureMatrix,
    spec: &ClassifierSpec,
    selector: SelectorKind,
    k_target: usize,
    direction: Direction,
    scheme: &CvScheme,
) -> Result<FeatureSubset> {
    match selector {
        SelectorKind::Sfs => sequential_select(matrix, spec, k_target, direction, scheme),
        SelectorKind::Rfecv => rfecv_select(matrix, spec, k_target, scheme),
        SelectorKind::None => {
            let score = cross_validate(spec, matrix, scheme)?.mean_accuracy;
            Ok(FeatureSubset::all(matrix, score))
        }
    }
}

/// Fits `spec` on the `subset` columns of a labeled matrix and wraps it in a
/// model document. The fallback label is the majority training class.
pub fn fit_document(
    matrix: &FeatureMatrix,
    subset: &[usize],
    spec: &ClassifierSpec,
) -> Result<ModelDocument> {
    let view = matrix.select_columns(subset)?;
    let model = train(spec, &view)?;
    Ok(ModelDocument {
        format_version: MODEL_FORMAT_VERSION,
        tool_version: TOOL_VERSION.into(),
        spec: spec.clone(),
        feature_names: view.names.clone(),
        fallback_label: majority_label(view.labels()?),
        model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPredictions {
    pub labels: Vec<u8>,
    /// Windows that kept fewer than two frames and got the fallback label.
    pub fallback: usize,
}

/// One prediction per input window, in order. Frames below `p` are dropped;
/// windows left with fewer than two frames get the document's fallback label.
pub fn predict_windows(doc: &ModelDocument, dataset: &Dataset, p: f64, eps: f64) -> Result<WindowPredictions> {
    let columns = doc
        .feature_names
        .iter()
        .map(|name| {
            FEATURE_NAMES
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::param(format!("model uses unknown feature `{name}`")))
        })
        .collect::<Result<Vec<usize>>>()?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("validity ratio p = {p} is outside [0, 1]")));
    }
    let filtered = Dataset {
        windows: dataset
            .windows
            .iter()
            .map(|w| {
                let mut w = w.clone();
                w.frames.retain(|f| f.valid_fraction >= p);
                w
            })
            .collect(),
        has_labels: false,
    };
    let mut rows = Vec::new();
    let mut slots = Vec::with_capacity(filtered.len());
    for window in &filtered.windows {
        if window.frames.len() >= 2 {
            let fv = extract_window_features(window, eps)?;
            rows.push(columns.iter().map(|&c| fv.values[c]).collect());
            slots.push(true);
        } else {
            slots.push(false);
        }
    }
    let matrix = FeatureMatrix::new(doc.feature_names.clone(), rows, None)?;
    let mut predicted = predict(&doc.model, &matrix)?.into_iter();
    let labels: Vec<u8> = slots
        .iter()
        .map(|&ok| {
            if ok {
                predicted.next().expect("one prediction per featurized window")
            } else {
                doc.fallback_label
            }
        })
        .collect();
    let fallback = slots.iter().filter(|&&ok| !ok).count();
    Ok(WindowPredictions { labels, fallback })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub windows: usize,
    pub fallback: usize,
    pub predicted_positive: usize,
    /// Present when every test window carries a raw label.
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub confusion: Option<ConfusionMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tool_version: String,
    pub config: PipelineConfig,
    pub data: DataSummary,
    pub screen: ScreenReport,
    pub selection: FeatureSubset,
    pub f1_mode: F1Mode,
    pub mean_accuracy: f64,
    /// Mean F1 under `f1_mode`.
    pub mean_f1: f64,
    pub cv: CvResult,
    pub test: Option<TestSummary>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One-row table: method, k-fold accuracy and F1, test accuracy and F1.
    pub fn summary_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        let test_acc = self.test.as_ref().and_then(|t| t.accuracy);
        let test_f1 = self.test.as_ref().and_then(|t| t.f1);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} | {:>10} | {:>9} | {:>8} | {:>7}",
            "Method", "K-fold Acc", "K-fold F1", "Test Acc", "Test F1"
        );
        let _ = writeln!(
            out,
            "{:<14} | {:>10} | {:>9} | {:>8} | {:>7}",
            self.config.classifier.display_name(),
            fmt(Some(self.mean_accuracy)),
            fmt(Some(self.mean_f1)),
            fmt(test_acc),
            fmt(test_f1)
        );
        let _ = writeln!(out, "selected: {}", self.selection.names.join(", "));
        out
    }
}

pub struct PipelineOutput {
    pub report: EvalReport,
    pub model: ModelDocument,
    pub predictions: Option<Vec<u8>>,
}

struct TrainingRun {
    data: DataSummary,
    screen: ScreenReport,
    selection: FeatureSubset,
    cv: CvResult,
    matrix: FeatureMatrix,
}

fn run_training(config: &PipelineConfig) -> Result<TrainingRun> {
    let raw = load_dataset(&config.train, Schema::Train).map_err(|e| e.in_stage("load_train"))?;
    let (prepared, data) = prepare_training(&raw, config.p, config.threshold, config.balance, config.seed)?;
    let matrix = extract_matrix(&prepared, config.eps).map_err(|e| e.in_stage("extract"))?;
    let screen = ridge_screen(&matrix, config.ridge_lambda, config.screen_lower, config.screen_upper)
        .map_err(|e| e.in_stage("screen"))?;
    let spec = config.spec();
    let scheme = config.scheme();
    let selection = select_features(
        &matrix,
        &spec,
        config.selector,
        config.k_target,
        config.direction,
        &scheme,
    )
    .map_err(|e| e.in_stage("select"))?;
    let cv = matrix
        .select_columns(&selection.indices)
        .and_then(|view| cross_validate(&spec, &view, &scheme))
        .map_err(|e| e.in_stage("evaluate"))?;
    Ok(TrainingRun {
        data,
        screen,
        selection,
        cv,
        matrix,
    })
}

/// Runs the workflow and writes the report and answer file when configured.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    let run = run_training(config)?;
    let spec = config.spec();
    let fit_rows = final_fit_rows(&run.matrix, config.balance, config.seed).map_err(|e| e.in_stage("fit"))?;
    let model = fit_document(&fit_rows, &run.selection.indices, &spec).map_err(|e| e.in_stage("fit"))?;

    let mut test = None;
    let mut predictions = None;
    if let Some(test_path) = &config.test {
        let test_set = load_dataset(test_path, Schema::Test).map_err(|e| e.in_stage("load_test"))?;
        let out = predict_windows(&model, &test_set, config.p, config.eps).map_err(|e| e.in_stage("predict"))?;
        let truth: Option<Vec<u8>> = test_set
            .windows
            .iter()
            .map(|w| w.raw_label.map(|r| u8::from(r >= config.threshold)))
            .collect();
        let confusion = match truth {
            Some(truth) if !truth.is_empty() => Some(ConfusionMatrix::from_predictions(&out.labels, &truth)?),
            _ => None,
        };
        test = Some(TestSummary {
            windows: out.labels.len(),
            fallback: out.fallback,
            predicted_positive: out.labels.iter().filter(|&&l| l == 1).count(),
            accuracy: confusion.map(|c| c.accuracy()),
            f1: confusion.map(|c| c.f1(config.f1_mode)),
            confusion,
        });
        if let Some(answer) = &config.answer {
            write_predictions(&out.labels, answer).map_err(|e| e.in_stage("write"))?;
        }
        predictions = Some(out.labels);
    }

    let mean_f1 = match config.f1_mode {
        F1Mode::Positive => run.cv.mean_f1,
        F1Mode::Macro => run.cv.mean_f1_macro,
    };
    let report = EvalReport {
        tool_version: TOOL_VERSION.into(),
        config: config.clone(),
        data: run.data,
        screen: run.screen,
        selection: run.selection,
        f1_mode: config.f1_mode,
        mean_accuracy: run.cv.mean_accuracy,
        mean_f1,
        cv: run.cv,
        test,
    };
    if let Some(path) = &config.report {
        let json = report.to_json()?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e).in_stage("write"))?;
    }
    Ok(PipelineOutput {
        report,
        model,
        predictions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub windows_used: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub f1_macro: f64,
    pub selected: Vec<String>,
}

/// Training-side pipeline (no test prediction) at each filter ratio.
pub fn run_sweep(config: &PipelineConfig, ratios: &[f64]) -> Result<Vec<SweepRow>> {
    ratios
        .iter()
        .map(|&p| {
            let cfg = PipelineConfig {
                p,
                ..config.clone()
            };
            let run = run_training(&cfg)?;
            Ok(SweepRow {
                p,
                windows_used: run.data.windows_used,
                accuracy: run.cv.mean_accuracy,
                f1: match config.f1_mode {
                    F1Mode::Positive => run.cv.mean_f1,
                    F1Mode::Macro => run.cv.mean_f1_macro,
                },
                f1_macro: run.cv.mean_f1_macro,
                selected: run.selection.names,
            })
        })
        .collect()
}

/// Ratio / accuracy / F1 table.
pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<14} | {:>8} | {:>8} | {:>7}", "Non-zero ratio", "Accuracy", "F1 Score", "Windows");
    for row in rows {
        let _ = writeln!(
            out,
            "{:<14} | {:>8.3} | {:>8.3} | {:>7}",
            row.p, row.accuracy, row.f1, row.windows_used
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{write_dataset, LabeledWindow, MinuteFrame};

    #[test]
    fn config_toml_defaults_and_overrides() {
        let cfg = PipelineConfig::from_toml(
            r#"
            train = "train.jsonl"
            p = 0.4
            selector = "rfecv"
            [classifier]
            family = "knn"
            k = 7
            "#,
        )
        .unwrap();
        assert_eq!(cfg.p, 0.4);
        assert_eq!(cfg.selector, SelectorKind::Rfecv);
        assert_eq!(cfg.classifier, Family::knn(7));
        assert_eq!(cfg.folds, 3);
        assert_eq!(cfg.k_target, 5);
        assert!(PipelineConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn fully_filtered_training_set_reports_filter_stage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.jsonl");
        let frame = MinuteFrame {
            valid_fraction: 0.9,
            ..MinuteFrame::constant(0.5)
        };
        let ds = Dataset {
            windows: (0..4)
                .map(|i| LabeledWindow {
                    frames: vec![frame; 3],
                    raw_label: Some(i % 2),
                    label: None,
                    sequence_index: i as usize,
                })
                .collect(),
            has_labels: true,
        };
        write_dataset(&ds, &path).unwrap();
        let cfg = PipelineConfig {
            train: path,
            p: 1.0,
            ..PipelineConfig::default()
        };
        let err = run_pipeline(&cfg).err().unwrap();
        assert!(matches!(err, Error::Stage { stage: "filter", .. }), "{err}");
        assert!(matches!(err.root(), Error::EmptyAfterFilter { .. }));
    }

    #[test]
    fn short_test_windows_get_fallback() {
        let rows = vec![vec![0.1], vec![0.2], vec![0.8], vec![0.9]];
        let matrix = FeatureMatrix::new(
            vec!["hr_mean".into()],
            rows,
            Some(vec![0, 0, 1, 1]),
        )
        .unwrap();
        let mut doc = fit_document(&matrix, &[0], &ClassifierSpec::new(Family::knn(1), 0)).unwrap();
        doc.fallback_label = 1;
        let high = MinuteFrame::constant(0.85);
        let low = MinuteFrame::constant(0.15);
        let unreliable = MinuteFrame {
            valid_fraction: 0.1,
            ..high
        };
        let window = |frames| LabeledWindow {
            frames,
            raw_label: None,
            label: None,
            sequence_index: 0,
        };
        let ds = Dataset {
            windows: vec![window(vec![low, low]), window(vec![high, unreliable]), window(vec![high, high])],
            has_labels: false,
        };
        let out = predict_windows(&doc, &ds, 0.5, 1e-6).unwrap();
        assert_eq!(out.labels, vec![0, 1, 1]);
        assert_eq!(out.fallback, 1);
    }
}
