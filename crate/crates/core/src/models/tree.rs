//! Regression tree grown by greedy binary splits that minimize the
//! child-weighted sum of squared errors; leaves predict the mean target of
//! their training rows.
//!
//! Split ties break toward the lowest feature index, then the lowest
//! threshold, so rebuilding a tree from the same inputs is reproducible.
//! An impure node splits even at zero gain (depth and `min_leaf` bound the
//! growth), which lets a depth-2 tree resolve XOR-style targets whose
//! first split alone buys nothing.

use crate::dataset::FeatureMatrix;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Branch { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

/// Flat-array regression tree; node 0 is the root, rows with
/// `x[feature] < threshold` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Branch { feature, threshold, left, right } => {
                    at = if row[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Thresholds used on `feature` anywhere in the tree.
    pub fn thresholds_on(&self, feature: usize) -> Vec<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Branch { feature: f, threshold, .. } if *f == feature => Some(*threshold),
                _ => None,
            })
            .collect()
    }
}

pub(crate) struct GrowConfig {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features considered per split; `None` means all.
    pub mtry: Option<usize>,
}

pub(crate) fn grow_tree(
    x: &FeatureMatrix,
    y: &[f64],
    rows: &[usize],
    cfg: &GrowConfig,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Tree {
    let mut nodes = Vec::new();
    let mut rows = rows.to_vec();
    grow_node(x, y, &mut rows, 0, cfg, &mut rng, &mut nodes);
    Tree { nodes }
}

fn grow_node(
    x: &FeatureMatrix,
    y: &[f64],
    rows: &mut [usize],
    depth: usize,
    cfg: &GrowConfig,
    rng: &mut Option<&mut ChaCha8Rng>,
    nodes: &mut Vec<Node>,
) -> usize {
    let n = rows.len() as f64;
    let sum: f64 = rows.iter().map(|&i| y[i]).sum();
    let sumsq: f64 = rows.iter().map(|&i| y[i] * y[i]).sum();
    let mean = sum / n;
    let sse = (sumsq - sum * mean).max(0.0);

    let depth_exhausted = cfg.max_depth.is_some_and(|d| depth >= d);
    if depth_exhausted || rows.len() < 2 * cfg.min_leaf || sse <= 1e-12 {
        nodes.push(Node::Leaf { value: mean });
        return nodes.len() - 1;
    }

    let candidates: Vec<usize> = match (cfg.mtry, rng.as_deref_mut()) {
        (Some(m), Some(r)) if m < x.n_cols() => {
            let mut all: Vec<usize> = (0..x.n_cols()).collect();
            all.shuffle(r);
            let mut picked: Vec<usize> = all.into_iter().take(m).collect();
            picked.sort_unstable();
            picked
        }
        _ => (0..x.n_cols()).collect(),
    };

    let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
    let mut scratch: Vec<(f64, f64)> = Vec::with_capacity(rows.len());
    for &feature in &candidates {
        scratch.clear();
        scratch.extend(rows.iter().map(|&i| (x.get(i, feature), y[i])));
        scratch.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut left_sum = 0.0;
        for (i, &(v, yi)) in scratch.iter().enumerate().take(scratch.len() - 1) {
            left_sum += yi;
            let next_v = scratch[i + 1].0;
            if next_v <= v {
                continue; // no boundary between equal values
            }
            let n_left = (i + 1) as f64;
            let n_right = n - n_left;
            if (i + 1) < cfg.min_leaf || (rows.len() - i - 1) < cfg.min_leaf {
                continue;
            }
            let right_sum = sum - left_sum;
            let gain =
                left_sum * left_sum / n_left + right_sum * right_sum / n_right - sum * mean;
            if best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, feature, 0.5 * (v + next_v)));
            }
        }
    }

    let Some((_, feature, threshold)) = best else {
        nodes.push(Node::Leaf { value: mean });
        return nodes.len() - 1;
    };

    // Partition rows in place, preserving relative order on each side.
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&i| x.get(i, feature) < threshold);
    let idx = nodes.len();
    nodes.push(Node::Branch { feature, threshold, left: 0, right: 0 });
    let mut left_rows = left_rows;
    let mut right_rows = right_rows;
    let left = grow_node(x, y, &mut left_rows, depth + 1, cfg, rng, nodes);
    let right = grow_node(x, y, &mut right_rows, depth + 1, cfg, rng, nodes);
    if let Node::Branch { left: l, right: r, .. } = &mut nodes[idx] {
        *l = left;
        *r = right;
    }
    idx
}
