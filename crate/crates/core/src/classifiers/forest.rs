use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, TreeModel, TreeParams};

/// Features examined at each split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `ceil(sqrt(d))` features drawn uniformly without replacement.
    #[default]
    Sqrt,
    All,
}

impl MaxFeatures {
    fn count(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().ceil() as usize).clamp(1, d),
            MaxFeatures::All => d,
        }
    }
}

pub(super) struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_features: usize,
    pub trees: Vec<TreeModel>,
    /// Features each tree actually splits on, ascending.
    pub feature_sets: Vec<Vec<usize>>,
}

impl ForestModel {
    /// Tree `t` draws from its own generator seeded with `seed + t`, so the
    /// result does not depend on how trees are scheduled across threads.
    pub(super) fn fit(rows: &[Vec<f64>], labels: &[u8], params: &ForestParams) -> Self {
        let n = rows.len();
        let d = rows[0].len();
        let per_split = params.max_features.count(d);
        let trees: Vec<TreeModel> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(t as u64));
                let sample: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let mut candidates = |d: usize| -> Vec<usize> {
                    if per_split >= d {
                        return (0..d).collect();
                    }
                    let mut picked = index::sample(&mut rng, d, per_split).into_vec();
                    picked.sort_unstable();
                    picked
                };
                grow(rows, labels, sample, &params.tree, &mut candidates)
            })
            .collect();
        let feature_sets = trees.iter().map(TreeModel::features_used).collect();
        ForestModel {
            n_features: d,
            trees,
            feature_sets,
        }
    }

    /// Majority vote over trees; ties go to class 0.
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let ones = self.trees.iter().filter(|t| t.predict_row(row) == 1).count();
        u8::from(ones * 2 > self.trees.len())
    }
}
