//! Seeded synthetic windows with a planted stress signal.
//!
//! Each frame is a fixed per-channel baseline plus Gaussian noise
//! (sigma 0.05), clamped to `[0, 1]`. Stressed windows raise heart rate and
//! skin conductance by `effect_size` and lower SDNN, RMSSD and skin
//! temperature by the same amount.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabeledWindow, MinuteFrame};
use crate::error::{Error, Result};

pub const NOISE_SIGMA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_windows: usize,
    pub frames_per_window: usize,
    /// Share of windows labeled stressed (rounded to a whole count).
    pub stress_fraction: f64,
    pub effect_size: f64,
    /// Probability that a frame's validity falls below 0.5.
    pub invalid_frame_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_windows: 400,
            frames_per_window: 60,
            stress_fraction: 0.5,
            effect_size: 0.15,
            invalid_frame_rate: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_windows < 1 || self.frames_per_window < 1 {
            return Err(Error::param("window and frame counts must be at least 1"));
        }
        for (name, v) in [
            ("stress_fraction", self.stress_fraction),
            ("invalid_frame_rate", self.invalid_frame_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        if !(self.effect_size >= 0.0 && self.effect_size.is_finite()) {
            return Err(Error::param(format!(
                "effect_size must be finite and non-negative, got {}",
                self.effect_size
            )));
        }
        Ok(())
    }
}

// Channel baselines: hr, sdnn, rmssd, lf, hf, gsr, st, st_std.
const BASELINE: [f64; 8] = [0.45, 0.5, 0.5, 0.4, 0.4, 0.35, 0.6, 0.2];
// Direction of the stress shift per channel.
const STRESS_SHIFT: [f64; 8] = [1.0, -1.0, -1.0, 0.0, 0.0, 1.0, -1.0, 0.0];

/// Generates a labeled dataset (`raw_label` 1 for stressed, 0 otherwise).
pub fn generate(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");

    let n_stressed = (config.n_windows as f64 * config.stress_fraction).round() as usize;
    let mut labels: Vec<u32> = (0..config.n_windows)
        .map(|i| u32::from(i < n_stressed))
        .collect();
    labels.shuffle(&mut rng);

    let windows = labels
        .into_iter()
        .enumerate()
        .map(|(index, raw)| {
            let shift = if raw == 1 { config.effect_size } else { 0.0 };
            let frames = (0..config.frames_per_window)
                .map(|_| {
                    let mut ch = [0.0; 8];
                    for (c, v) in ch.iter_mut().enumerate() {
                        let x = BASELINE[c] + STRESS_SHIFT[c] * shift + noise.sample(&mut rng);
                        *v = x.clamp(0.0, 1.0);
                    }
                    let valid_fraction = if rng.random_bool(config.invalid_frame_rate) {
                        rng.random_range(0.0..0.5)
                    } else {
                        rng.random_range(0.5..=1.0)
                    };
                    MinuteFrame {
                        heart_rate: ch[0],
                        sdnn: ch[1],
                        rmssd: ch[2],
                        lf_power: ch[3],
                        hf_power: ch[4],
                        gsr_level: ch[5],
                        skin_temp: ch[6],
                        skin_temp_std: ch[7],
                        valid_fraction,
                    }
                })
                .collect();
            LabeledWindow {
                frames,
                raw_label: Some(raw),
                label: None,
                sequence_index: index,
            }
        })
        .collect();
    Ok(Dataset {
        windows,
        has_labels: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: usize, effect: f64, seed: u64) -> SynthConfig {
        SynthConfig {
            n_windows: n,
            effect_size: effect,
            seed,
            ..SynthConfig::default()
        }
    }

    fn class_means(ds: &Dataset, f: fn(&MinuteFrame) -> f64) -> ([f64; 2], [f64; 2], [usize; 2]) {
        // Per-window channel means, grouped by class: (mean, variance, count).
        let mut vals: [Vec<f64>; 2] = [vec![], vec![]];
        for w in &ds.windows {
            let m = w.frames.iter().map(f).sum::<f64>() / w.frames.len() as f64;
            vals[w.raw_label.unwrap() as usize].push(m);
        }
        let mut mean = [0.0; 2];
        let mut var = [0.0; 2];
        for c in 0..2 {
            let n = vals[c].len() as f64;
            mean[c] = vals[c].iter().sum::<f64>() / n;
            var[c] = vals[c].iter().map(|v| (v - mean[c]).powi(2)).sum::<f64>() / (n - 1.0);
        }
        (mean, var, [vals[0].len(), vals[1].len()])
    }

    fn welch_t(ds: &Dataset, f: fn(&MinuteFrame) -> f64) -> f64 {
        let (m, v, n) = class_means(ds, f);
        (m[1] - m[0]) / (v[0] / n[0] as f64 + v[1] / n[1] as f64).sqrt()
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(generate(&config(20, 0.15, 3)).unwrap(), generate(&config(20, 0.15, 3)).unwrap());
        assert_ne!(generate(&config(20, 0.15, 3)).unwrap(), generate(&config(20, 0.15, 4)).unwrap());
    }

    #[test]
    fn values_respect_frame_bounds() {
        let ds = generate(&SynthConfig {
            effect_size: 0.9,
            ..config(30, 0.9, 1)
        })
        .unwrap();
        for w in &ds.windows {
            assert_eq!(w.frames.len(), 60);
            for f in &w.frames {
                assert!(f.out_of_range().is_none());
            }
        }
        assert_eq!(ds.windows.iter().filter(|w| w.raw_label == Some(1)).count(), 15);
    }

    #[test]
    fn null_effect_is_indistinguishable() {
        // |t| < 2.576 is a two-sided test at the 0.01 level.
        let ds = generate(&config(500, 0.0, 21)).unwrap();
        let channels: [fn(&MinuteFrame) -> f64; 5] = [
            |f| f.heart_rate,
            |f| f.sdnn,
            |f| f.rmssd,
            |f| f.gsr_level,
            |f| f.skin_temp,
        ];
        for ch in channels {
            assert!(welch_t(&ds, ch).abs() < 2.576);
        }
    }

    #[test]
    fn gsr_gap_tracks_effect_size() {
        let ds = generate(&config(600, 0.15, 5)).unwrap();
        let (m, v, n) = class_means(&ds, |f| f.gsr_level);
        let se = (v[0] / n[0] as f64 + v[1] / n[1] as f64).sqrt();
        assert!(((m[1] - m[0]) - 0.15).abs() < 3.0 * se + 1e-3, "gap {}", m[1] - m[0]);
        assert!(welch_t(&ds, |f| f.skin_temp) < -10.0);
    }

    #[test]
    fn invalid_rate_controls_low_validity_share() {
        let ds = generate(&SynthConfig {
            invalid_frame_rate: 0.3,
            ..config(100, 0.1, 8)
        })
        .unwrap();
        let frames: Vec<_> = ds.windows.iter().flat_map(|w| &w.frames).collect();
        let low = frames.iter().filter(|f| f.valid_fraction < 0.5).count() as f64 / frames.len() as f64;
        assert!((low - 0.3).abs() < 0.02, "{low}");
    }

    #[test]
    fn rejects_bad_config() {
        assert!(generate(&SynthConfig { n_windows: 0, ..SynthConfig::default() }).is_err());
        assert!(generate(&SynthConfig { stress_fraction: 1.5, ..SynthConfig::default() }).is_err());
        assert!(generate(&SynthConfig { effect_size: -0.1, ..SynthConfig::default() }).is_err());
    }
}
