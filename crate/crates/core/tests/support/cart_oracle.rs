//! Exhaustive CART reference on integer features with unit weights.
//!
//! Every candidate split is scored with exact integer arithmetic: the
//! weighted child impurity `1 − (Σ lᶜ²/n_L + Σ rᶜ²/n_R)/n` is minimised by
//! maximising `S = (n_R Σ lᶜ² + n_L Σ rᶜ²) / (n_L n_R)`, which is compared by
//! cross-multiplication. Exact ties keep the lower feature, then the lower
//! threshold.

#![allow(dead_code)]

use grammage_core::domain::GrammageClass;
use grammage_core::learners::{TrainingSet, TreeModel, TreeNode};

#[derive(Debug, Clone, PartialEq)]
pub enum OracleNode {
    /// Split on `x[feature] < (lo + hi) / 2`; `lo`/`hi` are the adjacent values.
    Split { feature: usize, lo: i64, hi: i64, left: Box<OracleNode>, right: Box<OracleNode> },
    Leaf { counts: Vec<u64> },
}

pub struct IntSet {
    pub x: Vec<[i64; 3]>,
    pub y: Vec<usize>,
    pub k: usize,
}

impl IntSet {
    pub fn to_training_set(&self) -> TrainingSet<f64> {
        TrainingSet {
            features: self.x.iter().map(|r| [r[0] as f64, r[1] as f64, r[2] as f64]).collect(),
            labels: self.y.clone(),
            classes: (0..self.k).map(|c| GrammageClass(40 + 2 * c as u16)).collect(),
        }
    }
}

fn counts(set: &IntSet, rows: &[usize]) -> Vec<u64> {
    let mut c = vec![0u64; set.k];
    for &r in rows {
        c[set.y[r]] += 1;
    }
    c
}

fn sum_sq(c: &[u64]) -> i128 {
    c.iter().map(|&v| (v as i128) * (v as i128)).sum()
}

/// (numerator, denominator) of S for one split.
fn score(left: &[u64], right: &[u64]) -> (i128, i128) {
    let nl: i128 = left.iter().map(|&v| v as i128).sum();
    let nr: i128 = right.iter().map(|&v| v as i128).sum();
    (nr * sum_sq(left) + nl * sum_sq(right), nl * nr)
}

fn greater(a: (i128, i128), b: (i128, i128)) -> bool {
    a.0 * b.1 > b.0 * a.1
}

pub fn best_split(set: &IntSet, rows: &[usize]) -> Option<(usize, i64, i64)> {
    let parent = counts(set, rows);
    let n: i128 = rows.len() as i128;
    // A split must beat the parent: S > Σ pᶜ² / n.
    let mut best_score = (sum_sq(&parent), n);
    let mut best = None;
    for f in 0..3 {
        let mut values: Vec<i64> = rows.iter().map(|&r| set.x[r][f]).collect();
        values.sort_unstable();
        values.dedup();
        for w in values.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| set.x[i][f] <= lo);
            let s = score(&counts(set, &l), &counts(set, &r));
            if greater(s, best_score) {
                best_score = s;
                best = Some((f, lo, hi));
            }
        }
    }
    best
}

pub fn grow(set: &IntSet, rows: &[usize], depth: usize, max_depth: usize) -> OracleNode {
    let c = counts(set, rows);
    let occupied = c.iter().filter(|&&v| v > 0).count();
    if depth >= max_depth || occupied <= 1 {
        return OracleNode::Leaf { counts: c };
    }
    match best_split(set, rows) {
        None => OracleNode::Leaf { counts: c },
        Some((feature, lo, hi)) => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| set.x[i][feature] <= lo);
            OracleNode::Split {
                feature,
                lo,
                hi,
                left: Box::new(grow(set, &l, depth + 1, max_depth)),
                right: Box::new(grow(set, &r, depth + 1, max_depth)),
            }
        }
    }
}

pub fn predict(node: &OracleNode, x: &[i64; 3]) -> usize {
    match node {
        OracleNode::Leaf { counts } => {
            let mut best = 0;
            for (i, &v) in counts.iter().enumerate() {
                if v > counts[best] {
                    best = i;
                }
            }
            best
        }
        OracleNode::Split { feature, lo, left, right, .. } => {
            if x[*feature] <= *lo {
                predict(left, x)
            } else {
                predict(right, x)
            }
        }
    }
}

/// First difference between the trained tree and the oracle, if any.
pub fn compare(tree: &TreeModel<f64>, id: usize, oracle: &OracleNode) -> Result<(), String> {
    match (&tree.nodes[id], oracle) {
        (TreeNode::Leaf { counts, .. }, OracleNode::Leaf { counts: want }) => {
            let got: Vec<u64> = counts.iter().map(|&c| c as u64).collect();
            if &got == want {
                Ok(())
            } else {
                Err(format!("node {id}: leaf counts {got:?}, oracle {want:?}"))
            }
        }
        (
            TreeNode::Split { feature, threshold, left, right },
            OracleNode::Split { feature: f, lo, hi, left: ol, right: or },
        ) => {
            let mid = (*lo as f64 + *hi as f64) / 2.0;
            if feature != f || *threshold != mid {
                return Err(format!("node {id}: split ({feature}, {threshold}), oracle ({f}, {mid})"));
            }
            compare(tree, *left, ol)?;
            compare(tree, *right, or)
        }
        (got, want) => Err(format!("node {id}: {got:?} vs oracle {want:?}")),
    }
}

/// Deterministic random integer dataset: up to 200 rows, 2–4 classes, small
/// value ranges so ties are frequent.
pub fn random_set(seed: u64) -> IntSet {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=200);
    let k = rng.random_range(2..=4);
    let span = rng.random_range(2..=15);
    let x = (0..n)
        .map(|_| [rng.random_range(0..span), rng.random_range(0..span), rng.random_range(-span..span)])
        .collect();
    // Label depends partly on the features so splits are informative.
    let y = (0..n).map(|_| rng.random_range(0..k)).collect::<Vec<_>>();
    let mut set = IntSet { x, y, k };
    for i in 0..n {
        if rng.random_bool(0.6) {
            set.y[i] = ((set.x[i][0] + set.x[i][1]) as usize / 3) % k;
        }
    }
    set
}
