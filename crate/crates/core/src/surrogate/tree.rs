use serde::{Deserialize, Serialize};

use super::{features, InverseModel, TargetVector, FEATURE_COUNT, TARGET_COUNT};
use crate::dataset::{Dataset, DesignRecord};
use crate::error::{Error, Result};
use crate::hydro::Requirement;

/// A node of the flattened tree. Children always sit at higher indices than their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    /// Rows with `feature <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        mean_target: [f64; TARGET_COUNT],
        /// Training-set indices of the rows in this leaf; repeats follow the bootstrap draw.
        member_ids: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TreeOptions {
    /// Depth cap; `None` grows every leaf to purity.
    pub max_depth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    /// Root at index 0.
    pub nodes: Vec<TreeNode>,
    /// Fingerprint of the dataset `member_ids` refer to.
    pub training_fingerprint: String,
    /// Per-output standard deviations used to weight the split criterion.
    pub output_scales: [f64; TARGET_COUNT],
}

impl RegressionTree {
    /// Index of the leaf `req` routes to.
    pub fn leaf_index(&self, req: &Requirement) -> usize {
        let x = features(req);
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                TreeNode::Leaf { .. } => return at,
            }
        }
    }

    pub fn leaf(&self, req: &Requirement) -> (&[f64; TARGET_COUNT], &[usize]) {
        match &self.nodes[self.leaf_index(req)] {
            TreeNode::Leaf {
                mean_target,
                member_ids,
            } => (mean_target, member_ids),
            TreeNode::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut max = 0;
        for (i, node) in self.nodes.iter().enumerate() {
            max = max.max(depth[i]);
            if let TreeNode::Split { left, right, .. } = node {
                depth[*left] = depth[i] + 1;
                depth[*right] = depth[i] + 1;
            }
        }
        max
    }

    /// Checks the structural invariants of a flattened tree.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Schema("tree has no nodes".into()));
        }
        let n = self.nodes.len();
        let mut parents = vec![0usize; n];
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= FEATURE_COUNT || !threshold.is_finite() {
                        return Err(Error::Schema(format!("node {i}: bad split")));
                    }
                    for &c in [left, right] {
                        if c <= i || c >= n {
                            return Err(Error::Schema(format!("node {i}: child {c} out of order")));
                        }
                        parents[c] += 1;
                    }
                }
                TreeNode::Leaf { member_ids, .. } => {
                    if member_ids.is_empty() {
                        return Err(Error::Schema(format!("leaf {i} has no members")));
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err(Error::Schema("nodes do not form a single tree".into()));
        }
        Ok(())
    }
}

impl InverseModel for RegressionTree {
    fn predict(&self, req: &Requirement) -> TargetVector {
        TargetVector(*self.leaf(req).0)
    }
}

/// Standard deviation of every output over the records; zero spreads map to 1.
pub(crate) fn output_scales(records: &[DesignRecord]) -> [f64; TARGET_COUNT] {
    let n = records.len() as f64;
    let mut mean = [0.0; TARGET_COUNT];
    for r in records {
        for (m, v) in mean.iter_mut().zip(TargetVector::from_record(r).0) {
            *m += v / n;
        }
    }
    let mut var = [0.0; TARGET_COUNT];
    for r in records {
        for ((s, v), m) in var.iter_mut().zip(TargetVector::from_record(r).0).zip(mean) {
            *s += (v - m).powi(2) / n;
        }
    }
    var.map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
}

/// Training matrix shared by every tree grown on one dataset.
pub(crate) struct TrainingSet {
    pub x: Vec<[f64; FEATURE_COUNT]>,
    /// Raw targets.
    pub y: Vec<[f64; TARGET_COUNT]>,
    /// Targets divided by `scales`.
    pub z: Vec<[f64; TARGET_COUNT]>,
    pub scales: [f64; TARGET_COUNT],
    pub fingerprint: String,
}

impl TrainingSet {
    pub fn new(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Training(
                "cannot fit a tree on an empty dataset".into(),
            ));
        }
        let scales = output_scales(&data.records);
        let x = data
            .records
            .iter()
            .map(|r| features(&r.requirement))
            .collect();
        let y: Vec<[f64; TARGET_COUNT]> = data
            .records
            .iter()
            .map(|r| TargetVector::from_record(r).0)
            .collect();
        let z = y
            .iter()
            .map(|t| {
                let mut s = *t;
                for (v, k) in s.iter_mut().zip(scales) {
                    *v /= k;
                }
                s
            })
            .collect();
        Ok(Self {
            x,
            y,
            z,
            scales,
            fingerprint: data.fingerprint(),
        })
    }

    /// Grows a tree over `sample`, a multiset of row indices.
    pub fn grow(&self, sample: Vec<usize>, options: &TreeOptions) -> RegressionTree {
        let mut nodes = Vec::new();
        let mut stack = vec![(sample, 0usize, None::<(usize, bool)>)];
        let mut scratch = Vec::new();
        while let Some((rows, depth, parent)) = stack.pop() {
            let index = nodes.len();
            if let Some((p, is_left)) = parent {
                if let TreeNode::Split { left, right, .. } = &mut nodes[p] {
                    if is_left {
                        *left = index;
                    } else {
                        *right = index;
                    }
                }
            }
            let depth_capped = options.max_depth.is_some_and(|d| depth >= d);
            let split = if depth_capped || self.is_terminal(&rows) {
                None
            } else {
                self.best_split(&rows, &mut scratch)
            };
            match split {
                Some((feature, threshold)) => {
                    let (left, right): (Vec<usize>, Vec<usize>) =
                        rows.iter().partition(|&&r| self.x[r][feature] <= threshold);
                    nodes.push(TreeNode::Split {
                        feature,
                        threshold,
                        left: 0,
                        right: 0,
                    });
                    // Right is pushed first so the left subtree is laid out next.
                    stack.push((right, depth + 1, Some((index, false))));
                    stack.push((left, depth + 1, Some((index, true))));
                }
                None => nodes.push(self.leaf(rows)),
            }
        }
        RegressionTree {
            nodes,
            training_fingerprint: self.fingerprint.clone(),
            output_scales: self.scales,
        }
    }

    /// Pure targets or indistinguishable inputs.
    fn is_terminal(&self, rows: &[usize]) -> bool {
        let first = rows[0];
        let pure = rows.iter().all(|&r| self.y[r] == self.y[first]);
        pure || rows.iter().all(|&r| self.x[r] == self.x[first])
    }

    fn leaf(&self, rows: Vec<usize>) -> TreeNode {
        let first = self.y[rows[0]];
        let mean_target = if rows.iter().all(|&r| self.y[r] == first) {
            first
        } else {
            let n = rows.len() as f64;
            let mut sum = [0.0; TARGET_COUNT];
            for &r in &rows {
                for (s, v) in sum.iter_mut().zip(self.y[r]) {
                    *s += v;
                }
            }
            sum.map(|s| s / n)
        };
        TreeNode::Leaf {
            mean_target,
            member_ids: rows,
        }
    }

    /// Highest weighted-variance reduction over all features and midpoint thresholds.
    ///
    /// Ties keep the lowest feature index, then the lowest threshold.
    fn best_split(&self, rows: &[usize], order: &mut Vec<usize>) -> Option<(usize, f64)> {
        let n = rows.len();
        let nf = n as f64;
        let mut total = [0.0; TARGET_COUNT];
        for &r in rows {
            for (t, v) in total.iter_mut().zip(self.z[r]) {
                *t += v;
            }
        }
        let mean = total.map(|t| t / nf);
        let parent_sse: f64 = rows
            .iter()
            .map(|&r| {
                self.z[r]
                    .iter()
                    .zip(mean)
                    .map(|(v, m)| (v - m).powi(2))
                    .sum::<f64>()
            })
            .sum();
        if parent_sse <= 0.0 {
            return None;
        }
        let min_gain = 1e-12 * parent_sse;

        let mut best: Option<(f64, usize, f64)> = None;
        for feature in 0..FEATURE_COUNT {
            order.clear();
            order.extend_from_slice(rows);
            order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
            let mut left_sum = [0.0; TARGET_COUNT];
            for j in 0..n - 1 {
                for (s, v) in left_sum.iter_mut().zip(self.z[order[j]]) {
                    *s += v;
                }
                let here = self.x[order[j]][feature];
                let next = self.x[order[j + 1]][feature];
                if here == next {
                    continue;
                }
                let nl = (j + 1) as f64;
                let nr = nf - nl;
                let spread: f64 = left_sum
                    .iter()
                    .zip(total)
                    .map(|(l, t)| (l / nl - (t - l) / nr).powi(2))
                    .sum();
                let gain = nl * nr / nf * spread;
                if gain > min_gain && best.is_none_or(|(g, _, _)| gain > g) {
                    let mut threshold = 0.5 * (here + next);
                    if !(threshold >= here && threshold < next) {
                        threshold = here;
                    }
                    best = Some((gain, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Grows one tree on every record until each leaf is pure.
pub fn fit_tree(data: &Dataset, options: &TreeOptions) -> Result<RegressionTree> {
    let set = TrainingSet::new(data)?;
    Ok(set.grow((0..data.len()).collect(), options))
}

/// Training records sharing the leaf `req` routes to, in first-seen order.
pub fn leaf_records(
    tree: &RegressionTree,
    req: &Requirement,
    data: &Dataset,
) -> Result<Vec<DesignRecord>> {
    let fingerprint = data.fingerprint();
    if fingerprint != tree.training_fingerprint {
        return Err(Error::Incoherent(format!(
            "tree was trained on {}, data is {}",
            tree.training_fingerprint, fingerprint
        )));
    }
    let (_, members) = tree.leaf(req);
    let mut seen = std::collections::HashSet::new();
    members
        .iter()
        .filter(|&&i| seen.insert(i))
        .map(|&i| {
            data.records.get(i).copied().ok_or_else(|| {
                Error::Incoherent(format!("leaf member {i} beyond {} records", data.len()))
            })
        })
        .collect()
}
