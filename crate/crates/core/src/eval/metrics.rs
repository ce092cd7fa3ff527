use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// F1 averaging.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Mode {
    /// F1 of class 1.
    #[default]
    Positive,
    /// Unweighted mean of the per-class F1 scores.
    Macro,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tp: usize,
}

impl ConfusionMatrix {
    pub fn from_predictions(pred: &[u8], truth: &[u8]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::LengthMismatch {
                left: pred.len(),
                right: truth.len(),
            });
        }
        if pred.is_empty() {
            return Err(Error::Empty { what: "label sequence" });
        }
        let mut cm = ConfusionMatrix::default();
        for (&p, &t) in pred.iter().zip(truth) {
            match (p, t) {
                (0, 0) => cm.tn += 1,
                (1, 0) => cm.fp += 1,
                (0, 1) => cm.fn_ += 1,
                (1, 1) => cm.tp += 1,
                (bad, 0 | 1) | (_, bad) => return Err(Error::InvalidLabel(bad)),
            }
        }
        Ok(cm)
    }

    pub fn total(&self) -> usize {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// `2 tp / (2 tp + fp + fn)`, 0 when the denominator is 0.
    pub fn f1_positive(&self) -> f64 {
        f1_from_counts(self.tp, self.fp, self.fn_)
    }

    /// Class-0 F1 treats negatives as the positive class.
    pub fn f1_negative(&self) -> f64 {
        f1_from_counts(self.tn, self.fn_, self.fp)
    }

    pub fn f1(&self, mode: F1Mode) -> f64 {
        match mode {
            F1Mode::Positive => self.f1_positive(),
            F1Mode::Macro => 0.5 * (self.f1_positive() + self.f1_negative()),
        }
    }

    pub fn merge(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            tn: self.tn + other.tn,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tp: self.tp + other.tp,
        }
    }
}

fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

pub fn accuracy(pred: &[u8], truth: &[u8]) -> Result<f64> {
    Ok(ConfusionMatrix::from_predictions(pred, truth)?.accuracy())
}

pub fn f1(pred: &[u8], truth: &[u8], mode: F1Mode) -> Result<f64> {
    Ok(ConfusionMatrix::from_predictions(pred, truth)?.f1(mode))
}
