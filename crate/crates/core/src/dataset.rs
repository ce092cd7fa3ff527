//! Window-level data model, JSONL ingestion, validity filtering, label
//! discretization, class balancing and prediction output.
//!
//! A window is one stress label together with the minute frames recorded
//! for it. Every operation here is pure: it returns a new [`Dataset`] and
//! leaves its input untouched.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One minute of per-channel physiological summaries.
///
/// Channels are pre-normalized to `[0, 1]`. `valid_fraction` is the share of
/// the minute's raw samples the recording mask marks as reliable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinuteFrame {
    #[serde(rename = "hr")]
    pub heart_rate: f64,
    pub sdnn: f64,
    pub rmssd: f64,
    #[serde(rename = "lf")]
    pub lf_power: f64,
    #[serde(rename = "hf")]
    pub hf_power: f64,
    #[serde(rename = "gsr")]
    pub gsr_level: f64,
    #[serde(rename = "st")]
    pub skin_temp: f64,
    #[serde(rename = "st_std")]
    pub skin_temp_std: f64,
    #[serde(rename = "valid")]
    pub valid_fraction: f64,
}

impl MinuteFrame {
    /// Frame with every channel set to `value` and full validity.
    pub fn constant(value: f64) -> Self {
        MinuteFrame {
            heart_rate: value,
            sdnn: value,
            rmssd: value,
            lf_power: value,
            hf_power: value,
            gsr_level: value,
            skin_temp: value,
            skin_temp_std: value,
            valid_fraction: 1.0,
        }
    }

    /// Field names as they appear in the JSONL format, with their values.
    pub fn fields(&self) -> [(&'static str, f64); 9] {
        [
            ("hr", self.heart_rate),
            ("sdnn", self.sdnn),
            ("rmssd", self.rmssd),
            ("lf", self.lf_power),
            ("hf", self.hf_power),
            ("gsr", self.gsr_level),
            ("st", self.skin_temp),
            ("st_std", self.skin_temp_std),
            ("valid", self.valid_fraction),
        ]
    }

    /// First field outside `[0, 1]` (NaN included), if any.
    pub fn out_of_range(&self) -> Option<(&'static str, f64)> {
        self.fields()
            .into_iter()
            .find(|&(_, v)| !(0.0..=1.0).contains(&v))
    }
}

/// An ordered run of minute frames sharing one self-reported stress label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub frames: Vec<MinuteFrame>,
    /// Stress level as shipped; absent for test windows.
    pub raw_label: Option<u32>,
    /// Binary class, set by [`discretize_labels`].
    pub label: Option<u8>,
    /// Position in the original file.
    pub sequence_index: usize,
}

/// Which JSONL layout a file follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    /// Every window carries `raw_label`.
    Train,
    /// `raw_label` may be omitted.
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub windows: Vec<LabeledWindow>,
    pub has_labels: bool,
}

#[derive(Serialize, Deserialize)]
struct WindowRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raw_label: Option<u32>,
    frames: Vec<MinuteFrame>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Binary labels in window order. Errors when any window is undiscretized.
    pub fn labels(&self) -> Result<Vec<u8>> {
        if !self.has_labels {
            return Err(Error::Unlabeled);
        }
        self.windows
            .iter()
            .map(|w| w.label.ok_or(Error::Unlabeled))
            .collect()
    }

    /// `(count of class 0, count of class 1)` over discretized windows.
    pub fn class_counts(&self) -> (usize, usize) {
        self.windows.iter().fold((0, 0), |(c0, c1), w| match w.label {
            Some(0) => (c0 + 1, c1),
            Some(_) => (c0, c1 + 1),
            None => (c0, c1),
        })
    }

    /// Total number of frames across all windows.
    pub fn frame_count(&self) -> usize {
        self.windows.iter().map(|w| w.frames.len()).sum()
    }

    /// Keeps windows with at least `min_frames` frames.
    pub fn retain_min_frames(&self, min_frames: usize) -> Dataset {
        Dataset {
            windows: self
                .windows
                .iter()
                .filter(|w| w.frames.len() >= min_frames)
                .cloned()
                .collect(),
            has_labels: self.has_labels,
        }
    }
}

/// Reads a JSONL window file. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn load_dataset(path: impl AsRef<Path>, schema: Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(BufReader::new(file), schema).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses JSONL windows from any reader. See [`load_dataset`].
pub fn parse_dataset(reader: impl BufRead, schema: Schema) -> Result<Dataset> {
    let mut windows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: WindowRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if schema == Schema::Train && record.raw_label.is_none() {
            return Err(Error::Parse {
                line: line_no,
                message: "missing field `raw_label`".into(),
            });
        }
        if record.frames.is_empty() {
            return Err(Error::EmptyWindow { line: line_no });
        }
        for frame in &record.frames {
            if let Some((field, value)) = frame.out_of_range() {
                return Err(Error::OutOfRange {
                    line: line_no,
                    field,
                    value,
                });
            }
        }
        windows.push(LabeledWindow {
            frames: record.frames,
            raw_label: record.raw_label,
            label: None,
            sequence_index: windows.len(),
        });
    }
    Ok(Dataset {
        windows,
        has_labels: schema == Schema::Train,
    })
}

/// Writes windows in the JSONL format read by [`load_dataset`]. Binary labels
/// are not part of the format; only `raw_label` is written.
pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_dataset_to(dataset, &mut out).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_dataset_to(dataset: &Dataset, out: &mut impl Write) -> Result<()> {
    for window in &dataset.windows {
        let record = WindowRecord {
            raw_label: window.raw_label,
            frames: window.frames.clone(),
        };
        serde_json::to_writer(&mut *out, &record)?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

/// Drops every frame whose `valid_fraction` is below `p` (frames at exactly
/// `p` are kept), then drops windows left without frames.
pub fn filter_by_validity(dataset: &Dataset, p: f64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!("validity ratio p = {p} is outside [0, 1]")));
    }
    let windows = dataset
        .windows
        .iter()
        .filter_map(|w| {
            let frames: Vec<MinuteFrame> = w
                .frames
                .iter()
                .filter(|f| f.valid_fraction >= p)
                .copied()
                .collect();
            (!frames.is_empty()).then(|| LabeledWindow {
                frames,
                ..w.clone()
            })
        })
        .collect();
    Ok(Dataset {
        windows,
        has_labels: dataset.has_labels,
    })
}

/// Maps `raw_label >= threshold` to class 1 and everything else to class 0.
pub fn discretize_labels(dataset: &Dataset, threshold: u32) -> Result<Dataset> {
    if !dataset.has_labels {
        return Err(Error::Unlabeled);
    }
    if threshold < 1 {
        return Err(Error::param("discretization threshold must be at least 1"));
    }
    let windows = dataset
        .windows
        .iter()
        .map(|w| {
            let raw = w.raw_label.ok_or(Error::Unlabeled)?;
            Ok(LabeledWindow {
                label: Some(u8::from(raw >= threshold)),
                ..w.clone()
            })
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        windows,
        has_labels: true,
    })
}

/// Undersamples the majority class uniformly at random until both classes
/// have the same count. Survivors keep their original order.
pub fn balance_classes(dataset: &Dataset, seed: u64) -> Result<Dataset> {
    let labels = dataset.labels()?;
    let keep = balanced_indices(&labels, seed)?;
    Ok(Dataset {
        windows: keep.into_iter().map(|i| dataset.windows[i].clone()).collect(),
        has_labels: true,
    })
}

/// Ascending positions that survive seeded majority-class undersampling.
pub fn balanced_indices(labels: &[u8], seed: u64) -> Result<Vec<usize>> {
    let (zeros, ones): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i] == 0);
    if zeros.is_empty() || ones.is_empty() {
        let present = labels.first().copied().ok_or(Error::Empty { what: "dataset" })?;
        return Err(Error::SingleClass(present));
    }
    let (minority, majority) = if zeros.len() <= ones.len() {
        (zeros, ones)
    } else {
        (ones, zeros)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept: Vec<usize> = index::sample(&mut rng, majority.len(), minority.len())
        .into_iter()
        .map(|i| majority[i])
        .chain(minority)
        .collect();
    kept.sort_unstable();
    Ok(kept)
}

/// Writes one `0`/`1` per line, newline-terminated.
pub fn write_predictions(labels: &[u8], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = format_predictions(labels)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn format_predictions(labels: &[u8]) -> Result<String> {
    if labels.is_empty() {
        return Err(Error::Empty { what: "prediction sequence" });
    }
    let mut text = String::with_capacity(labels.len() * 2);
    for &label in labels {
        match label {
            0 => text.push_str("0\n"),
            1 => text.push_str("1\n"),
            other => return Err(Error::InvalidLabel(other)),
        }
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(valid: f64) -> MinuteFrame {
        MinuteFrame {
            valid_fraction: valid,
            ..MinuteFrame::constant(0.5)
        }
    }

    fn window(idx: usize, raw: u32, frames: Vec<MinuteFrame>) -> LabeledWindow {
        LabeledWindow {
            frames,
            raw_label: Some(raw),
            label: None,
            sequence_index: idx,
        }
    }

    fn labeled(labels: &[u8]) -> Dataset {
        Dataset {
            windows: labels
                .iter()
                .enumerate()
                .map(|(i, &l)| LabeledWindow {
                    label: Some(l),
                    ..window(i, l as u32, vec![frame(1.0)])
                })
                .collect(),
            has_labels: true,
        }
    }

    const LINE: &str = r#"{"raw_label": 2, "frames": [{"hr": 0.5, "sdnn": 0.1, "rmssd": 0.2, "lf": 0.3, "hf": 0.4, "gsr": 0.6, "st": 0.7, "st_std": 0.05, "valid": 1.0}]}"#;

    #[test]
    fn loads_windows_in_file_order() {
        let text = format!("{LINE}\n{LINE}\n\n{LINE}\n");
        let ds = parse_dataset(text.as_bytes(), Schema::Train).unwrap();
        assert_eq!(ds.len(), 3);
        assert!(ds.has_labels);
        let idx: Vec<_> = ds.windows.iter().map(|w| w.sequence_index).collect();
        assert_eq!(idx, vec![0, 1, 2]);
        assert_eq!(ds.windows[0].raw_label, Some(2));
        assert_eq!(ds.windows[0].frames[0].gsr_level, 0.6);
    }

    #[test]
    fn rejects_out_of_range_channel() {
        let bad = LINE.replace("\"gsr\": 0.6", "\"gsr\": 1.5");
        let text = format!("{LINE}\n{bad}\n");
        let err = parse_dataset(text.as_bytes(), Schema::Train).unwrap_err();
        match err {
            Error::OutOfRange { line, field, value } => {
                assert_eq!(line, 2);
                assert_eq!(field, "gsr");
                assert_eq!(value, 1.5);
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert!(parse_dataset(text.as_bytes(), Schema::Train)
            .unwrap_err()
            .to_string()
            .contains("gsr"));
    }

    #[test]
    fn rejects_empty_window_and_garbage() {
        let err = parse_dataset(r#"{"raw_label": 0, "frames": []}"#.as_bytes(), Schema::Train)
            .unwrap_err();
        assert!(matches!(err, Error::EmptyWindow { line: 1 }));
        let err = parse_dataset(format!("{LINE}\nnot json\n").as_bytes(), Schema::Train).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn train_schema_requires_label_test_schema_does_not() {
        let unlabeled = r#"{"frames": [{"hr": 0.5, "sdnn": 0.1, "rmssd": 0.2, "lf": 0.3, "hf": 0.4, "gsr": 0.6, "st": 0.7, "st_std": 0.05, "valid": 1.0}]}"#;
        assert!(parse_dataset(unlabeled.as_bytes(), Schema::Train).is_err());
        let ds = parse_dataset(unlabeled.as_bytes(), Schema::Test).unwrap();
        assert!(!ds.has_labels);
        assert_eq!(ds.windows[0].raw_label, None);
    }

    #[test]
    fn filter_keeps_all_valid_window() {
        let ds = Dataset {
            windows: vec![window(0, 0, vec![frame(1.0); 60])],
            has_labels: true,
        };
        assert_eq!(filter_by_validity(&ds, 0.5).unwrap(), ds);
    }

    #[test]
    fn filter_drops_fully_unreliable_window() {
        let ds = Dataset {
            windows: vec![window(0, 0, vec![frame(0.3); 60]), window(1, 1, vec![frame(0.8); 5])],
            has_labels: true,
        };
        let out = filter_by_validity(&ds, 0.5).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.windows[0].sequence_index, 1);
    }

    #[test]
    fn filter_trims_frames_inside_window() {
        let mut frames = vec![frame(0.9); 40];
        frames.extend(vec![frame(0.1); 20]);
        let expected = frames.iter().filter(|f| f.valid_fraction >= 0.5).count();
        let ds = Dataset {
            windows: vec![window(0, 0, frames)],
            has_labels: true,
        };
        let out = filter_by_validity(&ds, 0.5).unwrap();
        assert_eq!(expected, 40);
        assert_eq!(out.windows[0].frames.len(), 40);
    }

    #[test]
    fn filter_threshold_is_inclusive() {
        let ds = Dataset {
            windows: vec![window(0, 0, vec![frame(0.5), frame(0.49999)])],
            has_labels: true,
        };
        assert_eq!(filter_by_validity(&ds, 0.5).unwrap().windows[0].frames.len(), 1);
        assert!(filter_by_validity(&ds, 1.5).is_err());
        assert!(filter_by_validity(&ds, f64::NAN).is_err());
    }

    #[test]
    fn discretize_examples() {
        let ds = Dataset {
            windows: [0, 1, 2, 0]
                .iter()
                .enumerate()
                .map(|(i, &r)| window(i, r, vec![frame(1.0)]))
                .collect(),
            has_labels: true,
        };
        let expected: Vec<u8> = [0u32, 1, 2, 0].iter().map(|&r| u8::from(r >= 2)).collect();
        assert_eq!(discretize_labels(&ds, 2).unwrap().labels().unwrap(), expected);
        assert_eq!(discretize_labels(&ds, 1).unwrap().labels().unwrap(), vec![0, 1, 1, 0]);
        let three = Dataset {
            windows: vec![window(0, 3, vec![frame(1.0)])],
            has_labels: true,
        };
        assert_eq!(discretize_labels(&three, 1).unwrap().labels().unwrap(), vec![1]);
        let kept = discretize_labels(&ds, 2).unwrap();
        assert_eq!(kept.windows[2].raw_label, Some(2));
    }

    #[test]
    fn discretize_rejects_unlabeled() {
        let ds = Dataset {
            windows: vec![],
            has_labels: false,
        };
        assert!(matches!(discretize_labels(&ds, 1), Err(Error::Unlabeled)));
        let labeled = Dataset {
            windows: vec![],
            has_labels: true,
        };
        assert!(discretize_labels(&labeled, 0).is_err());
    }

    #[test]
    fn balance_already_balanced_is_identity() {
        let labels: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let ds = labeled(&labels);
        assert_eq!(balance_classes(&ds, 3).unwrap(), ds);
    }

    #[test]
    fn balance_undersamples_majority_in_order() {
        let mut labels = vec![0u8; 12];
        labels.extend([1u8; 4]);
        let ds = labeled(&labels);
        let out = balance_classes(&ds, 11).unwrap();
        assert_eq!(out.class_counts(), (4, 4));
        let idx: Vec<_> = out.windows.iter().map(|w| w.sequence_index).collect();
        assert!(idx.windows(2).all(|p| p[0] < p[1]));
        assert!(idx.iter().filter(|&&i| i < 12).count() == 4);
        assert_eq!(balance_classes(&ds, 11).unwrap(), out);
    }

    #[test]
    fn balance_rejects_single_class() {
        assert!(matches!(balance_classes(&labeled(&[1, 1, 1]), 0), Err(Error::SingleClass(1))));
    }

    #[test]
    fn prediction_format() {
        assert_eq!(format_predictions(&[1, 0, 1]).unwrap(), "1\n0\n1\n");
        assert!(format_predictions(&[]).is_err());
        assert!(format_predictions(&[2]).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("answer.txt");
        let labels: Vec<u8> = (0..960).map(|i| (i % 3 == 0) as u8).collect();
        write_predictions(&labels, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 960);
        assert!(text.ends_with("1\n") || text.ends_with("0\n"));
        assert!(!text.ends_with("\n\n"));
        assert!(write_predictions(&[1], dir.path().join("missing/answer.txt")).is_err());
    }

    fn arb_frame() -> impl Strategy<Value = MinuteFrame> {
        (proptest::array::uniform8(0.0f64..=1.0), 0.0f64..=1.0).prop_map(|(c, v)| MinuteFrame {
            heart_rate: c[0],
            sdnn: c[1],
            rmssd: c[2],
            lf_power: c[3],
            hf_power: c[4],
            gsr_level: c[5],
            skin_temp: c[6],
            skin_temp_std: c[7],
            valid_fraction: v,
        })
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        proptest::collection::vec(
            (proptest::collection::vec(arb_frame(), 1..8), 0u32..4),
            0..10,
        )
        .prop_map(|ws| Dataset {
            windows: ws
                .into_iter()
                .enumerate()
                .map(|(i, (frames, raw))| window(i, raw, frames))
                .collect(),
            has_labels: true,
        })
    }

    proptest! {
        #[test]
        fn filter_is_idempotent(ds in arb_dataset(), p in 0.0f64..=1.0) {
            let once = filter_by_validity(&ds, p).unwrap();
            prop_assert_eq!(filter_by_validity(&once, p).unwrap(), once.clone());
            let idx: Vec<_> = once.windows.iter().map(|w| w.sequence_index).collect();
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn filter_extremes(ds in arb_dataset()) {
            prop_assert_eq!(filter_by_validity(&ds, 0.0).unwrap().frame_count(), ds.frame_count());
            let max = ds.windows.iter().flat_map(|w| &w.frames).map(|f| f.valid_fraction).fold(-1.0, f64::max);
            if max < 1.0 {
                let p = (max + 1.0) / 2.0;
                prop_assert!(filter_by_validity(&ds, p).unwrap().is_empty());
            }
        }

        #[test]
        fn jsonl_round_trip(ds in arb_dataset()) {
            let mut buf = Vec::new();
            write_dataset_to(&ds, &mut buf).unwrap();
            let back = parse_dataset(buf.as_slice(), Schema::Train).unwrap();
            prop_assert_eq!(back, ds);
        }

        #[test]
        fn balance_counts_equal_minimum(labels in proptest::collection::vec(0u8..2, 2..60), seed in any::<u64>()) {
            let ds = labeled(&labels);
            let (c0, c1) = ds.class_counts();
            prop_assume!(c0 > 0 && c1 > 0);
            let out = balance_classes(&ds, seed).unwrap();
            prop_assert_eq!(out.class_counts(), (c0.min(c1), c0.min(c1)));
            let idx: Vec<_> = out.windows.iter().map(|w| w.sequence_index).collect();
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
