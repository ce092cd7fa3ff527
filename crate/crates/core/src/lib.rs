//! Contextless stress classification from minute-level wearable summaries.
//!
//! The crate ingests labeled windows of per-minute physiological summaries
//! (heart rate, HRV statistics, skin conductance, skin temperature), filters
//! unreliable minutes, reduces each window to sixteen handcrafted features,
//! selects a feature subset with a wrapper search and evaluates from-scratch
//! classifiers with order-preserving k-fold cross-validation.

pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod selection;
pub mod synth;

pub use error::{Error, Result};
