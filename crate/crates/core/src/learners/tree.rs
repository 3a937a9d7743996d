//! CART classification tree with weighted Gini impurity.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{ClassDistribution, Classifier, TrainingSet};
use crate::domain::{GrammageClass, RollMeasurement};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::scalar::Scalar;

pub const N_FEATURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub features_per_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 100,
            features_per_split: N_FEATURES,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if !(1..=N_FEATURES).contains(&self.features_per_split) {
            return Err(Error::Config(format!(
                "features_per_split must be in 1..=3, got {}",
                self.features_per_split
            )));
        }
        Ok(())
    }
}

/// Gini impurity `1 − Σ pᵢ²` of weighted class counts.
pub fn gini<T: Scalar>(weighted_counts: &[T]) -> Result<T> {
    let total: T = weighted_counts.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::Domain("gini of an empty node".into()));
    }
    Ok(gini_with_total(weighted_counts, total))
}

fn gini_with_total<T: Scalar>(counts: &[T], total: T) -> T {
    let sq: T = counts
        .iter()
        .map(|&c| {
            let p = c / total;
            p * p
        })
        .sum();
    T::one() - sq
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split<T> {
    pub feature: usize,
    pub threshold: T,
    /// Weighted impurity decrease of the parent node.
    pub decrease: T,
}

/// Exhaustive split search over `candidate_features`.
///
/// Thresholds are midpoints between consecutive distinct sorted values; rows
/// with `x[feature] < threshold` go left. The largest decrease wins; a later
/// candidate only displaces the incumbent when it is better by more than
/// [`Scalar::tie_tolerance`], which breaks ties toward the lower feature index
/// and then the lower threshold.
pub fn best_split<T: Scalar>(
    features: &[[T; 3]],
    labels: &[usize],
    weights: &[T],
    n_classes: usize,
    candidate_features: &[usize],
) -> Option<Split<T>> {
    let rows: Vec<usize> = (0..labels.len()).collect();
    search_split(features, labels, weights, n_classes, &rows, candidate_features)
}

fn search_split<T: Scalar>(
    features: &[[T; 3]],
    labels: &[usize],
    weights: &[T],
    n_classes: usize,
    rows: &[usize],
    candidate_features: &[usize],
) -> Option<Split<T>> {
    if rows.len() < 2 {
        return None;
    }
    let mut parent = vec![T::zero(); n_classes];
    for &r in rows {
        parent[labels[r]] = parent[labels[r]] + weights[r];
    }
    let total: T = parent.iter().copied().sum();
    if !(total > T::zero()) {
        return None;
    }
    let parent_gini = gini_with_total(&parent, total);
    let tol = T::tie_tolerance();

    let mut candidates = candidate_features.to_vec();
    candidates.sort_unstable();
    candidates.dedup();

    let mut best: Option<Split<T>> = None;
    let mut sorted = rows.to_vec();
    let mut left = vec![T::zero(); n_classes];
    let mut right = vec![T::zero(); n_classes];
    for &f in &candidates {
        sorted.sort_by(|&a, &b| {
            features[a][f]
                .partial_cmp(&features[b][f])
                .expect("finite features")
                .then(a.cmp(&b))
        });
        left.iter_mut().for_each(|c| *c = T::zero());
        right.copy_from_slice(&parent);
        let mut w_left = T::zero();
        for pos in 0..sorted.len() - 1 {
            let r = sorted[pos];
            left[labels[r]] = left[labels[r]] + weights[r];
            right[labels[r]] = right[labels[r]] - weights[r];
            w_left = w_left + weights[r];
            let lo = features[r][f];
            let hi = features[sorted[pos + 1]][f];
            if !(lo < hi) {
                continue;
            }
            let w_right = total - w_left;
            if !(w_left > T::zero()) || !(w_right > T::zero()) {
                continue;
            }
            let decrease = parent_gini
                - (w_left / total) * gini_with_total(&left, w_left)
                - (w_right / total) * gini_with_total(&right, w_right);
            let improves = match &best {
                None => decrease > tol,
                Some(b) => decrease > b.decrease + tol,
            };
            if improves {
                best = Some(Split {
                    feature: f,
                    threshold: midpoint(lo, hi),
                    decrease,
                });
            }
        }
    }
    best
}

/// Midpoint that still separates `lo` from `hi` when they are adjacent floats.
fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    let mid = lo + (hi - lo) / T::lit(2.0);
    if mid > lo {
        mid
    } else {
        hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode<T> {
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<T>,
        distribution: ClassDistribution<T>,
    },
}

impl<T: Scalar> TreeNode<T> {
    pub fn leaf(counts: Vec<T>) -> Option<Self> {
        let distribution = ClassDistribution::from_counts(&counts)?;
        Some(TreeNode::Leaf {
            counts,
            distribution,
        })
    }
}

/// Nodes are stored in pre-order; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel<T> {
    pub nodes: Vec<TreeNode<T>>,
    pub classes: Vec<GrammageClass>,
    pub params: TreeParams,
}

impl<T: Scalar> TreeModel<T> {
    pub fn leaf_for(&self, x: &[T; 3]) -> &TreeNode<T> {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[*feature] < *threshold { *left } else { *right },
                leaf => return leaf,
            }
        }
    }

    /// Longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[TreeNode<T>], id: usize) -> usize {
            match &nodes[id] {
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

pub fn tree_predict_proba<T: Scalar>(tree: &TreeModel<T>, x: &RollMeasurement<T>) -> ClassDistribution<T> {
    match tree.leaf_for(&x.features()) {
        TreeNode::Leaf { distribution, .. } => distribution.clone(),
        TreeNode::Split { .. } => unreachable!("leaf_for returns leaves"),
    }
}

impl<T: Scalar> Classifier<T> for TreeModel<T> {
    fn classes(&self) -> &[GrammageClass] {
        &self.classes
    }

    fn predict_proba(&self, x: &RollMeasurement<T>) -> ClassDistribution<T> {
        tree_predict_proba(self, x)
    }
}

pub(crate) fn check_weights<T: Scalar>(weights: &[T], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::Config(format!(
            "{} weights for {n} rows",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
        return Err(Error::Config("weights must be finite and non-negative".into()));
    }
    if !weights.iter().any(|w| *w > T::zero()) {
        return Err(Error::Config("all weights are zero".into()));
    }
    Ok(())
}

/// Grows a tree on `set`. `weights` defaults to all ones; rows with zero
/// weight are ignored.
pub fn train_tree<T: Scalar>(
    set: &TrainingSet<T>,
    weights: Option<&[T]>,
    params: &TreeParams,
    seed: u64,
) -> Result<TreeModel<T>> {
    if set.is_empty() {
        return Err(Error::InsufficientData("training set is empty".into()));
    }
    params.validate()?;
    let ones;
    let weights = match weights {
        Some(w) => {
            check_weights(w, set.len())?;
            w
        }
        None => {
            ones = vec![T::one(); set.len()];
            &ones
        }
    };
    let rows: Vec<usize> = (0..set.len()).filter(|&i| weights[i] > T::zero()).collect();
    let mut builder = Builder {
        set,
        weights,
        params,
        rng: rng::stream(seed, Purpose::Tree, 0),
        nodes: Vec::new(),
    };
    builder.grow(rows, 0);
    Ok(TreeModel {
        nodes: builder.nodes,
        classes: set.classes.clone(),
        params: *params,
    })
}

struct Builder<'a, T> {
    set: &'a TrainingSet<T>,
    weights: &'a [T],
    params: &'a TreeParams,
    rng: rng::Rng,
    nodes: Vec<TreeNode<T>>,
}

impl<T: Scalar> Builder<'_, T> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let k = self.set.n_classes();
        let mut counts = vec![T::zero(); k];
        for &r in &rows {
            let c = self.set.labels[r];
            counts[c] = counts[c] + self.weights[r];
        }
        let id = self.nodes.len();
        let occupied = counts.iter().filter(|c| **c > T::zero()).count();
        if depth >= self.params.max_depth || occupied <= 1 {
            self.push_leaf(counts);
            return id;
        }
        let candidates = self.draw_features();
        let Some(split) = search_split(
            &self.set.features,
            &self.set.labels,
            self.weights,
            k,
            &rows,
            &candidates,
        ) else {
            self.push_leaf(counts);
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.set.features[r][split.feature] < split.threshold);
        self.nodes.push(TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: usize::MAX,
            right: usize::MAX,
        });
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        if let TreeNode::Split {
            left: l, right: r, ..
        } = &mut self.nodes[id]
        {
            *l = left;
            *r = right;
        }
        id
    }

    fn push_leaf(&mut self, counts: Vec<T>) {
        let leaf = TreeNode::leaf(counts).expect("grown nodes carry positive weight");
        self.nodes.push(leaf);
    }

    fn draw_features(&mut self) -> Vec<usize> {
        let mut f = index::sample(&mut self.rng, N_FEATURES, self.params.features_per_split).into_vec();
        f.sort_unstable();
        f
    }
}
