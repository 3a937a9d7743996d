//! Bagged forest of CART trees with soft voting.
//!
//! Each tree sees a uniform bootstrap of the rows; row weights given to the
//! forest multiply the bootstrap multiplicities, so a boosted forest fits a
//! weighted problem without discarding low-weight rows outright.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{check_weights, train_tree, TreeModel, TreeParams};
use super::{ClassDistribution, Classifier, TrainingSet};
use crate::domain::{GrammageClass, RollMeasurement};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Defaults to 1 = ⌊√3⌋.
    pub features_per_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 100,
            features_per_split: 1,
        }
    }
}

impl ForestParams {
    /// Base learner used inside each boosting stage.
    pub fn boost_base() -> Self {
        ForestParams {
            n_trees: 10,
            max_depth: 1,
            features_per_split: 1,
        }
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            features_per_split: self.features_per_split,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel<T> {
    pub trees: Vec<TreeModel<T>>,
    /// Seed each tree was grown from, in tree order.
    pub tree_seeds: Vec<u64>,
    pub params: ForestParams,
    pub classes: Vec<GrammageClass>,
}

pub fn train_forest<T: Scalar>(
    set: &TrainingSet<T>,
    weights: Option<&[T]>,
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel<T>> {
    if set.is_empty() {
        return Err(Error::InsufficientData("training set is empty".into()));
    }
    if params.n_trees == 0 {
        return Err(Error::Config("a forest needs at least one tree".into()));
    }
    params.tree_params().validate()?;
    if let Some(w) = weights {
        check_weights(w, set.len())?;
    }
    let tree_seeds: Vec<u64> = (0..params.n_trees as u64)
        .map(|t| rng::derive_seed(seed, Purpose::Tree, t))
        .collect();
    let tree_params = params.tree_params();
    let trees = tree_seeds
        .par_iter()
        .map(|&s| {
            let w = bootstrap_weights(set.len(), weights, s);
            train_tree(set, Some(&w), &tree_params, s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel {
        trees,
        tree_seeds,
        params: *params,
        classes: set.classes.clone(),
    })
}

/// Bootstrap multiplicity times row weight. Falls back to the plain row
/// weights when the draw misses every weighted row.
fn bootstrap_weights<T: Scalar>(n: usize, weights: Option<&[T]>, seed: u64) -> Vec<T> {
    let mut rng = rng::stream(seed, Purpose::Shuffle, 0);
    let mut mult = vec![0u32; n];
    for _ in 0..n {
        mult[rng.random_range(0..n)] += 1;
    }
    match weights {
        None => mult.iter().map(|&m| T::lit(f64::from(m))).collect(),
        Some(w) => {
            let out: Vec<T> = mult
                .iter()
                .zip(w)
                .map(|(&m, &wi)| T::lit(f64::from(m)) * wi)
                .collect();
            if out.iter().any(|v| *v > T::zero()) {
                out
            } else {
                w.to_vec()
            }
        }
    }
}

pub fn forest_predict_proba<T: Scalar>(forest: &ForestModel<T>, x: &RollMeasurement<T>) -> ClassDistribution<T> {
    let k = forest.classes.len();
    let features = x.features();
    let mut acc = vec![T::zero(); k];
    for tree in &forest.trees {
        if let super::TreeNode::Leaf { distribution, .. } = tree.leaf_for(&features) {
            for (a, p) in acc.iter_mut().zip(&distribution.0) {
                *a = *a + *p;
            }
        }
    }
    let n = T::lit(forest.trees.len() as f64);
    ClassDistribution(acc.into_iter().map(|a| a / n).collect())
}

impl<T: Scalar> Classifier<T> for ForestModel<T> {
    fn classes(&self) -> &[GrammageClass] {
        &self.classes
    }

    fn predict_proba(&self, x: &RollMeasurement<T>) -> ClassDistribution<T> {
        forest_predict_proba(self, x)
    }
}
