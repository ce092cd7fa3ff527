//! CART classification tree with Gini impurity.
//!
//! Every node scans the candidate features in ascending order and, per
//! feature, the midpoints between consecutive distinct sorted values. The
//! split with the lowest weighted child impurity wins; ties keep the lowest
//! feature index, then the lowest threshold. Splits with zero impurity
//! decrease are allowed so that XOR-like patterns can still be separated.
//! Rows with `x[feature] <= threshold` go left.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_samples_split: 2,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        label: u8,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Arena-allocated tree; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub n_features: usize,
    pub nodes: Vec<Node>,
}

impl TreeModel {
    pub(super) fn fit(rows: &[Vec<f64>], labels: &[u8], params: &TreeParams) -> Self {
        let d = rows[0].len();
        let all: Vec<usize> = (0..d).collect();
        let sample: Vec<usize> = (0..rows.len()).collect();
        grow(rows, labels, sample, params, &mut |_| all.clone())
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { label } => return label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Distinct features used by any split, ascending.
    pub fn features_used(&self) -> Vec<usize> {
        let mut used: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        used.sort_unstable();
        used.dedup();
        used
    }
}

/// Grows a tree over the rows listed in `sample` (repeats allowed).
/// `candidates` returns the ascending feature indices to scan at a node.
pub(super) fn grow(
    rows: &[Vec<f64>],
    labels: &[u8],
    sample: Vec<usize>,
    params: &TreeParams,
    candidates: &mut dyn FnMut(usize) -> Vec<usize>,
) -> TreeModel {
    let n_features = rows[0].len();
    let mut nodes = Vec::new();
    build(rows, labels, sample, 0, params, n_features, candidates, &mut nodes);
    TreeModel { n_features, nodes }
}

#[allow(clippy::too_many_arguments)]
fn build(
    rows: &[Vec<f64>],
    labels: &[u8],
    sample: Vec<usize>,
    depth: usize,
    params: &TreeParams,
    n_features: usize,
    candidates: &mut dyn FnMut(usize) -> Vec<usize>,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    let ones = sample.iter().filter(|&&i| labels[i] == 1).count();
    let leaf = Node::Leaf {
        label: u8::from(ones * 2 > sample.len()),
    };
    nodes.push(leaf.clone());

    let pure = ones == 0 || ones == sample.len();
    let depth_capped = params.max_depth.is_some_and(|m| depth >= m);
    if pure || sample.len() < params.min_samples_split || depth_capped {
        return id;
    }
    let features = candidates(n_features);
    let Some((feature, threshold)) = best_split(rows, labels, &sample, &features) else {
        return id;
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        sample.into_iter().partition(|&i| rows[i][feature] <= threshold);
    let left = build(rows, labels, left_rows, depth + 1, params, n_features, candidates, nodes);
    let right = build(rows, labels, right_rows, depth + 1, params, n_features, candidates, nodes);
    nodes[id] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    id
}

/// `n * gini` for a node holding `zeros` and `ones`.
fn weighted_gini(zeros: usize, ones: usize) -> f64 {
    let n = (zeros + ones) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (z, o) = (zeros as f64, ones as f64);
    n - (z * z + o * o) / n
}

fn best_split(
    rows: &[Vec<f64>],
    labels: &[u8],
    sample: &[usize],
    features: &[usize],
) -> Option<(usize, f64)> {
    let total_ones = sample.iter().filter(|&&i| labels[i] == 1).count();
    let total_zeros = sample.len() - total_ones;
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = sample.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| rows[a][f].total_cmp(&rows[b][f]));
        let (mut left_zeros, mut left_ones) = (0usize, 0usize);
        for pos in 0..order.len() - 1 {
            if labels[order[pos]] == 1 {
                left_ones += 1;
            } else {
                left_zeros += 1;
            }
            let lo = rows[order[pos]][f];
            let hi = rows[order[pos + 1]][f];
            if lo >= hi {
                continue;
            }
            let score = weighted_gini(left_zeros, left_ones)
                + weighted_gini(total_zeros - left_zeros, total_ones - left_ones);
            if best.is_none_or(|(s, _, _)| score < s) {
                let mut threshold = 0.5 * (lo + hi);
                if threshold >= hi || !threshold.is_finite() {
                    threshold = lo;
                }
                best = Some((score, f, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
