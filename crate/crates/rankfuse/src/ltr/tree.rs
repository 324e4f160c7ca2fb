//! Depth-limited regression trees with Newton-step leaf values.
//!
//! Split search is exact greedy: every boundary between distinct values of
//! every feature is scored with the second-order gain
//! `G_L^2/H_L + G_R^2/H_R - G^2/H`, subject to `min_child_weight` on each
//! child's hessian mass. Features and boundaries are scanned in ascending
//! order and only strictly better gains replace the incumbent, so tree
//! construction is deterministic.

use serde::{Deserialize, Serialize};

/// One node of a tree. Internal nodes carry `feature`, `threshold`,
/// `left`, `right`; leaves carry `leaf_value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub index: usize,
    pub feature: Option<usize>,
    pub threshold: Option<f64>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub leaf_value: Option<f64>,
}

/// A regression tree stored as a flat node array rooted at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

fn gain_term(g: f64, h: f64) -> f64 {
    if h > 0.0 {
        g * g / h
    } else {
        0.0
    }
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    gain: f64,
    left_rows: Vec<usize>,
    right_rows: Vec<usize>,
}

struct Builder<'a> {
    features: &'a [Vec<f64>],
    targets: &'a [f64],
    hessians: &'a [f64],
    max_depth: usize,
    min_child_weight: f64,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn leaf(&mut self, g: f64, h: f64) -> usize {
        let index = self.nodes.len();
        self.nodes.push(TreeNode {
            index,
            feature: None,
            threshold: None,
            left: None,
            right: None,
            leaf_value: Some(if h > 0.0 { g / h } else { 0.0 }),
        });
        index
    }

    fn best_split(&self, rows: &[usize], g: f64, h: f64) -> Option<SplitCandidate> {
        let feature_count = self.features[rows[0]].len();
        let parent = gain_term(g, h);
        let mut best: Option<SplitCandidate> = None;
        for feature in 0..feature_count {
            let mut ordered: Vec<usize> = rows.to_vec();
            ordered.sort_by(|&a, &b| {
                self.features[a][feature]
                    .total_cmp(&self.features[b][feature])
                    .then(a.cmp(&b))
            });
            let mut g_left = 0.0;
            let mut h_left = 0.0;
            for i in 1..ordered.len() {
                let prev = ordered[i - 1];
                g_left += self.targets[prev];
                h_left += self.hessians[prev];
                let lo = self.features[prev][feature];
                let hi = self.features[ordered[i]][feature];
                if lo == hi {
                    continue;
                }
                let threshold = lo + (hi - lo) / 2.0;
                // Degenerate midpoints (adjacent floats) would break the
                // `feature < threshold` partition; skip them.
                if threshold <= lo {
                    continue;
                }
                let g_right = g - g_left;
                let h_right = h - h_left;
                if h_left < self.min_child_weight || h_right < self.min_child_weight {
                    continue;
                }
                let gain = gain_term(g_left, h_left) + gain_term(g_right, h_right);
                if gain > parent && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(SplitCandidate {
                        feature,
                        threshold,
                        gain,
                        left_rows: ordered[..i].to_vec(),
                        right_rows: ordered[i..].to_vec(),
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, rows: &[usize], depth: usize) -> usize {
        let g: f64 = rows.iter().map(|&r| self.targets[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hessians[r]).sum();
        if depth >= self.max_depth || rows.len() < 2 {
            return self.leaf(g, h);
        }
        let Some(split) = self.best_split(rows, g, h) else {
            return self.leaf(g, h);
        };
        let index = self.nodes.len();
        self.nodes.push(TreeNode {
            index,
            feature: Some(split.feature),
            threshold: Some(split.threshold),
            left: None,
            right: None,
            leaf_value: None,
        });
        let left = self.build(&split.left_rows, depth + 1);
        let right = self.build(&split.right_rows, depth + 1);
        self.nodes[index].left = Some(left);
        self.nodes[index].right = Some(right);
        index
    }
}

impl RegressionTree {
    /// Fit one tree to per-row targets (negative gradients) and hessians.
    ///
    /// Rows are indices into `features`; they are sorted before building so
    /// the fit does not depend on caller ordering.
    pub(crate) fn fit(
        features: &[Vec<f64>],
        targets: &[f64],
        hessians: &[f64],
        max_depth: usize,
        min_child_weight: f64,
    ) -> RegressionTree {
        let mut rows: Vec<usize> = (0..features.len()).collect();
        rows.sort_unstable();
        let mut builder = Builder {
            features,
            targets,
            hessians,
            max_depth,
            min_child_weight,
            nodes: Vec::new(),
        };
        builder.build(&rows, 0);
        RegressionTree {
            nodes: builder.nodes,
        }
    }

    /// Unscaled prediction: walk from the root, going left when
    /// `feature < threshold`.
    pub fn predict(&self, values: &[f64]) -> f64 {
        let mut node = &self.nodes[0];
        loop {
            match (node.feature, node.threshold) {
                (Some(feature), Some(threshold)) => {
                    let next = if values[feature] < threshold {
                        node.left.expect("internal node has left child")
                    } else {
                        node.right.expect("internal node has right child")
                    };
                    node = &self.nodes[next];
                }
                _ => return node.leaf_value.expect("leaf node has value"),
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.leaf_value.is_some()).count()
    }

    /// Highest feature index referenced by any split, if the tree splits.
    pub fn max_feature_index(&self) -> Option<usize> {
        self.nodes.iter().filter_map(|n| n.feature).max()
    }
}
