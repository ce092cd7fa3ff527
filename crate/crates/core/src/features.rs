//! Window-level feature extraction.
//!
//! Each window's surviving minute frames are reduced to sixteen scalars in a
//! fixed order (see [`FEATURE_NAMES`]). Standard deviations are population
//! (divide by `n`); percentiles interpolate linearly at rank `q/100 * (n-1)`.
//! Skin-temperature slopes are successive differences over the frames that
//! survived filtering, treated as contiguous minutes.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::{Dataset, LabeledWindow};
use crate::error::{Error, Result};

pub const NUM_FEATURES: usize = 16;

/// Canonical feature order.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "hr_mean",
    "hr_std",
    "hr_qdev",
    "hrv_sdnn_std",
    "hrv_sdnn_mean",
    "hrv_rmssd_mean",
    "lf_p90",
    "lfhf_p90",
    "lfhf_mean",
    "gsr_mean",
    "gsr_qdev",
    "st_mean",
    "st_var_mean",
    "st_slope_max",
    "st_slope_mean",
    "st_slope_p90",
];

/// Floor applied to the HF denominator of the LF/HF ratio.
pub const DEFAULT_LFHF_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; NUM_FEATURES],
}

impl FeatureVector {
    pub fn names() -> &'static [&'static str; NUM_FEATURES] {
        &FEATURE_NAMES
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| self.values[i])
    }
}

/// Row-major feature table with optional binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Option<Vec<u8>>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>, labels: Option<Vec<u8>>) -> Result<Self> {
        if let Some(row) = rows.iter().find(|r| r.len() != names.len()) {
            return Err(Error::WidthMismatch {
                expected: names.len(),
                found: row.len(),
            });
        }
        if let Some(labels) = &labels {
            if labels.len() != rows.len() {
                return Err(Error::LengthMismatch {
                    left: rows.len(),
                    right: labels.len(),
                });
            }
            if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
                return Err(Error::InvalidLabel(bad));
            }
        }
        Ok(FeatureMatrix {
            names,
            rows,
            labels,
        })
    }

    /// Matrix with canonical column names.
    pub fn canonical(rows: Vec<Vec<f64>>, labels: Option<Vec<u8>>) -> Result<Self> {
        Self::new(
            FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            rows,
            labels,
        )
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn labels(&self) -> Result<&[u8]> {
        self.labels.as_deref().ok_or(Error::Unlabeled)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Projection onto `columns`, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<FeatureMatrix> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.n_cols()) {
            return Err(Error::param(format!(
                "column index {bad} out of range for {} columns",
                self.n_cols()
            )));
        }
        Ok(FeatureMatrix {
            names: columns.iter().map(|&c| self.names[c].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| columns.iter().map(|&c| r[c]).collect())
                .collect(),
            labels: self.labels.clone(),
        })
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: self.names.clone(),
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| rows.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Errors on the first NaN or infinite entry.
    pub fn check_finite(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, column: j });
            }
        }
        Ok(())
    }

    /// Writes a CSV with the column names plus a trailing `label` column.
    /// Unlabeled matrices leave that column empty.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        header.push("label");
        writer.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            record.push(
                self.labels
                    .as_ref()
                    .map(|l| l[i].to_string())
                    .unwrap_or_default(),
            );
            writer.write_record(&record)?;
        }
        writer.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv(input: impl Read) -> Result<FeatureMatrix> {
        let mut reader = csv::Reader::from_reader(input);
        let header = reader.headers()?.clone();
        let mut names: Vec<String> = header.iter().map(str::to_string).collect();
        if names.last().map(String::as_str) != Some("label") {
            return Err(Error::Parse {
                line: 1,
                message: "feature CSV must end with a `label` column".into(),
            });
        }
        names.pop();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut any_label = false;
        let mut any_missing = false;
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let line = i + 2;
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    message: format!("`{s}`: {e}"),
                })
            };
            let row = record
                .iter()
                .take(names.len())
                .map(parse)
                .collect::<Result<Vec<_>>>()?;
            match record.get(names.len()).map(str::trim) {
                Some("") | None => any_missing = true,
                Some(s) => {
                    any_label = true;
                    labels.push(s.parse::<u8>().map_err(|e| Error::Parse {
                        line,
                        message: format!("label `{s}`: {e}"),
                    })?);
                }
            }
            rows.push(row);
        }
        if any_label && any_missing {
            return Err(Error::Parse {
                line: 1,
                message: "label column is only partially filled".into(),
            });
        }
        FeatureMatrix::new(names, rows, any_label.then_some(labels))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }
}

fn require_non_empty(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        Err(Error::Empty { what: "value sequence" })
    } else {
        Ok(())
    }
}

/// Arithmetic mean, accumulated as offsets from the first value so that a
/// constant sequence returns that constant exactly.
pub fn mean(values: &[f64]) -> Result<f64> {
    require_non_empty(values)?;
    let first = values[0];
    Ok(first + values.iter().map(|v| v - first).sum::<f64>() / values.len() as f64)
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> Result<f64> {
    let m = mean(values)?;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    Ok(var.sqrt())
}

/// Linear-interpolation percentile, `q` in percent.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    require_non_empty(values)?;
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::param(format!("percentile q = {q} is outside [0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, q))
}

fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

/// 75th minus 25th percentile.
pub fn quartile_deviation(values: &[f64]) -> Result<f64> {
    require_non_empty(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, 75.0) - percentile_sorted(&sorted, 25.0))
}

/// Successive differences `values[i + 1] - values[i]`.
pub fn slope_series(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::param(format!(
            "slope series needs at least 2 points, got {}",
            values.len()
        )));
    }
    Ok(values.windows(2).map(|w| w[1] - w[0]).collect())
}

pub fn lf_hf_ratio(lf: f64, hf: f64, eps: f64) -> f64 {
    lf / hf.max(eps)
}

pub fn extract_window_features(window: &LabeledWindow, eps: f64) -> Result<FeatureVector> {
    let frames = &window.frames;
    if frames.len() < 2 {
        return Err(Error::TooFewFrames {
            sequence_index: window.sequence_index,
            frames: frames.len(),
        });
    }
    if !(eps > 0.0) {
        return Err(Error::param(format!("LF/HF epsilon must be positive, got {eps}")));
    }
    let channel = |f: fn(&crate::dataset::MinuteFrame) -> f64| frames.iter().map(f).collect::<Vec<f64>>();
    let hr = channel(|f| f.heart_rate);
    let sdnn = channel(|f| f.sdnn);
    let rmssd = channel(|f| f.rmssd);
    let lf = channel(|f| f.lf_power);
    let lfhf: Vec<f64> = frames
        .iter()
        .map(|f| lf_hf_ratio(f.lf_power, f.hf_power, eps))
        .collect();
    let gsr = channel(|f| f.gsr_level);
    let st = channel(|f| f.skin_temp);
    let st_std = channel(|f| f.skin_temp_std);
    let slopes = slope_series(&st)?;
    let slope_max = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let values = [
        mean(&hr)?,
        std_dev(&hr)?,
        quartile_deviation(&hr)?,
        std_dev(&sdnn)?,
        mean(&sdnn)?,
        mean(&rmssd)?,
        percentile(&lf, 90.0)?,
        percentile(&lfhf, 90.0)?,
        mean(&lfhf)?,
        mean(&gsr)?,
        quartile_deviation(&gsr)?,
        mean(&st)?,
        mean(&st_std)?,
        slope_max,
        mean(&slopes)?,
        percentile(&slopes, 90.0)?,
    ];
    Ok(FeatureVector { values })
}

/// One row per window, in dataset order. Labels are copied when every window
/// has been discretized.
pub fn extract_matrix(dataset: &Dataset, eps: f64) -> Result<FeatureMatrix> {
    let rows = dataset
        .windows
        .par_iter()
        .map(|w| extract_window_features(w, eps).map(|fv| fv.values.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let labels = if dataset.has_labels {
        Some(dataset.labels()?)
    } else {
        None
    };
    FeatureMatrix::canonical(rows, labels)
}
