//! Ordered k-fold evaluation, metrics and the end-to-end pipeline.

mod cv;
mod kfold;
mod metrics;
pub mod pipeline;

pub use cv::{cross_val_score, cross_validate, cross_validate_models, CvResult, CvScheme, FoldScore};
pub use kfold::{kfold_split, FoldPlan};
pub use metrics::{accuracy, f1, ConfusionMatrix, F1Mode};
pub use pipeline::{run_pipeline, run_sweep, EvalReport, PipelineConfig};
