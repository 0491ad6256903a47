//! Isolation forest: randomized binary trees that isolate points, with
//! anomaly scores derived from average isolation path length.
//!
//! Shorter paths mean easier isolation, which means more anomalous. Scores
//! are `2^(-E[h(x)] / c(n))` where `c(n)` normalizes by the expected path
//! length of an unsuccessful BST search over the subsample size.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::DenseArray;

/// Euler's constant as the harmonic-number approximation uses it:
/// H(i) ~ ln(i) + 0.5772.
const EULER_GAMMA: f64 = 0.5772;

/// Expected path length of an unsuccessful BST search over n points:
/// `c(n) = 2*H(n-1) - 2*(n-1)/n` with `H(i) = ln(i) + 0.5772`.
///
/// For n <= 1 the formula is undefined (H(0)); zero or one points need no
/// splits to isolate, so c is 0 there.
pub fn c_factor(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let nf = n as f64;
    2.0 * ((nf - 1.0).ln() + EULER_GAMMA) - 2.0 * (nf - 1.0) / nf
}

/// Eq.-level score mapping: `s = 2^(-mean_path / c_norm)`.
pub fn score_from_mean_path(mean_path: f64, c_norm: f64) -> f64 {
    (2.0f64).powf(-mean_path / c_norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Internal {
        split_feature: usize,
        split_value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

/// One isolation tree stored as a node arena.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoTree {
    pub nodes: Vec<TreeNode>,
    pub root: usize,
}

impl IsoTree {
    /// Edges from root to the reached leaf plus the unresolved-subtree
    /// adjustment `c(leaf.size)` for non-singleton leaves. The `ops`
    /// accumulator counts split comparisons performed.
    fn path_length_with_ops(&self, point: &[f64], ops: &mut u64) -> f64 {
        let mut node = self.root;
        let mut edges = 0.0;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { size } => return edges + c_factor(*size),
                TreeNode::Internal {
                    split_feature,
                    split_value,
                    left,
                    right,
                } => {
                    *ops += 1;
                    node = if point[*split_feature] < *split_value {
                        *left
                    } else {
                        *right
                    };
                    edges += 1.0;
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

/// Ensemble of isolation trees plus the score normalizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoForest {
    pub trees: Vec<IsoTree>,
    pub subsample_size: usize,
    pub num_trees: usize,
    pub c_norm: f64,
    pub master_seed: u64,
    pub feature_dim: usize,
}

/// Build an isolation forest over the rows of `data`.
///
/// Each tree grows on an independent uniform subsample of `subsample_size`
/// rows, splitting a uniformly random splittable feature at a uniformly
/// random value strictly inside that feature's (min, max) over in-node
/// points, until a node is a singleton, has no splittable feature, or
/// depth reaches `max_depth`. Tree i draws from a seed derived from
/// (master_seed, i), so existing trees never change when more are added.
pub fn build_forest(
    data: &DenseArray,
    num_trees: usize,
    subsample_size: usize,
    max_depth: usize,
    master_seed: u64,
) -> Result<IsoForest> {
    if data.rows() == 0 {
        return Err(Error::Input("build_forest: empty data".into()));
    }
    if subsample_size > data.rows() {
        return Err(Error::Input(format!(
            "build_forest: subsample_size {} exceeds {} rows",
            subsample_size,
            data.rows()
        )));
    }
    if subsample_size < 2 {
        return Err(Error::Input(
            "build_forest: subsample_size must be at least 2 (score normalizer is zero below that)"
                .into(),
        ));
    }
    if num_trees == 0 {
        return Err(Error::Input("build_forest: num_trees must be positive".into()));
    }

    let trees: Vec<IsoTree> = (0..num_trees)
        .into_par_iter()
        .map(|i| build_tree(data, subsample_size, max_depth, master_seed, i as u64))
        .collect();

    Ok(IsoForest {
        trees,
        subsample_size,
        num_trees,
        c_norm: c_factor(subsample_size),
        master_seed,
        feature_dim: data.cols(),
    })
}

fn build_tree(
    data: &DenseArray,
    subsample_size: usize,
    max_depth: usize,
    master_seed: u64,
    tree_index: u64,
) -> IsoTree {
    let mut rng = rng::stream_rng(master_seed, tree_index);
    let sample = rand::seq::index::sample(&mut rng, data.rows(), subsample_size).into_vec();
    let mut nodes = Vec::new();
    let root = grow(data, &sample, 0, max_depth, &mut rng, &mut nodes);
    IsoTree { nodes, root }
}

fn grow(
    data: &DenseArray,
    in_node: &[usize],
    depth: usize,
    max_depth: usize,
    rng: &mut impl Rng,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    if in_node.len() <= 1 || depth >= max_depth {
        nodes.push(TreeNode::Leaf { size: in_node.len() });
        return nodes.len() - 1;
    }

    // Features with min < max over the in-node points are splittable.
    let dims = data.cols();
    let mut candidates = Vec::with_capacity(dims);
    for f in 0..dims {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &i in in_node {
            let v = data.get(i, f);
            min = min.min(v);
            max = max.max(v);
        }
        if min < max {
            candidates.push((f, min, max));
        }
    }
    if candidates.is_empty() {
        nodes.push(TreeNode::Leaf { size: in_node.len() });
        return nodes.len() - 1;
    }

    let (feature, min, max) = candidates[rng.gen_range(0..candidates.len())];
    let split = min + (max - min) * rng.gen::<f64>();
    if !(split > min && split < max) {
        // min and max are adjacent floats: the open interval is empty.
        nodes.push(TreeNode::Leaf { size: in_node.len() });
        return nodes.len() - 1;
    }

    let (left_pts, right_pts): (Vec<usize>, Vec<usize>) =
        in_node.iter().partition(|&&i| data.get(i, feature) < split);
    let left = grow(data, &left_pts, depth + 1, max_depth, rng, nodes);
    let right = grow(data, &right_pts, depth + 1, max_depth, rng, nodes);
    nodes.push(TreeNode::Internal {
        split_feature: feature,
        split_value: split,
        left,
        right,
    });
    nodes.len() - 1
}

/// Path length of `point` through one tree.
pub fn path_length(tree: &IsoTree, point: &[f64], feature_dim: usize) -> Result<f64> {
    if point.len() != feature_dim {
        return Err(Error::Input(format!(
            "path_length: point has {} features, tree was built on {}",
            point.len(),
            feature_dim
        )));
    }
    let mut ops = 0;
    Ok(tree.path_length_with_ops(point, &mut ops))
}

impl IsoForest {
    /// Anomaly score in (0, 1]: `2^(-mean path length / c(subsample_size))`.
    /// Higher means more anomalous.
    pub fn anomaly_score(&self, point: &[f64]) -> Result<f64> {
        let mut ops = 0;
        self.anomaly_score_with_ops(point, &mut ops)
    }

    /// Same as [`anomaly_score`](Self::anomaly_score) but counts split
    /// comparisons into `ops` for resource profiling.
    pub fn anomaly_score_with_ops(&self, point: &[f64], ops: &mut u64) -> Result<f64> {
        if point.len() != self.feature_dim {
            return Err(Error::Input(format!(
                "anomaly_score: point has {} features, forest was built on {}",
                point.len(),
                self.feature_dim
            )));
        }
        let mut total = 0.0;
        for tree in &self.trees {
            total += tree.path_length_with_ops(point, ops);
        }
        let mean = total / self.trees.len() as f64;
        Ok(score_from_mean_path(mean, self.c_norm))
    }

    /// Score every row of a feature matrix.
    pub fn score_rows(&self, data: &DenseArray) -> Result<Vec<f64>> {
        let mut ops = 0;
        self.score_rows_with_ops(data, &mut ops)
    }

    pub fn score_rows_with_ops(&self, data: &DenseArray, ops: &mut u64) -> Result<Vec<f64>> {
        (0..data.rows())
            .map(|i| self.anomaly_score_with_ops(data.row(i), ops))
            .collect()
    }

    /// Total node count across trees; the forest's contribution to the
    /// parameter tally.
    pub fn node_count(&self) -> usize {
        self.trees.iter().map(IsoTree::node_count).sum()
    }
}
