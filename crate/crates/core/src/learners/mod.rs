//! Classifiers over the three roll features.
//!
//! All learners emit a [`ClassDistribution`] aligned with the class list they
//! were trained on. Class indices are positions in that ascending list, so
//! "lowest index" and "lowest grammage" coincide in every tie rule.

pub mod boost;
pub mod forest;
pub mod knn;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, GrammageClass, RollMeasurement};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use boost::{boost_predict, samme_r_scores, train_adaboost, train_adaboost_traced, BoostModel, BoostParams, BoostStage, BoostTrace};
pub use forest::{forest_predict_proba, train_forest, ForestModel, ForestParams};
pub use knn::{fit_scaler, knn_predict, KnnModel, Scaler};
pub use tree::{best_split, gini, train_tree, tree_predict_proba, Split, TreeModel, TreeNode, TreeParams};

/// Probability vector aligned with a model's class list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassDistribution<T>(pub Vec<T>);

impl<T: Scalar> ClassDistribution<T> {
    pub fn uniform(k: usize) -> Self {
        ClassDistribution(vec![T::one() / T::lit(k as f64); k])
    }

    /// Normalises non-negative weights; `None` if they sum to zero.
    pub fn from_counts(counts: &[T]) -> Option<Self> {
        let total: T = counts.iter().copied().sum();
        if !(total > T::zero()) {
            return None;
        }
        Some(ClassDistribution(counts.iter().map(|&c| c / total).collect()))
    }

    pub fn probabilities(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn max(&self) -> T {
        self.0.iter().copied().fold(T::zero(), T::max)
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub trait Classifier<T: Scalar> {
    fn classes(&self) -> &[GrammageClass];

    fn predict_proba(&self, x: &RollMeasurement<T>) -> ClassDistribution<T>;

    fn predict(&self, x: &RollMeasurement<T>) -> GrammageClass {
        self.classes()[self.predict_proba(x).argmax()]
    }

    /// Largest class probability, in `[0, 1]`.
    fn confidence(&self, x: &RollMeasurement<T>) -> T {
        self.predict_proba(x).max()
    }
}

/// Features, class indices and class list of a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet<T> {
    pub features: Vec<[T; 3]>,
    pub labels: Vec<usize>,
    pub classes: Vec<GrammageClass>,
}

impl<T: Scalar> TrainingSet<T> {
    pub fn from_dataset(ds: &Dataset<T>) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::InsufficientData("training set is empty".into()));
        }
        let classes = ds.classes().to_vec();
        let labels = ds
            .iter()
            .map(|i| classes.binary_search(&i.label).expect("label from class list"))
            .collect();
        Ok(TrainingSet {
            features: ds.iter().map(|i| i.measurement.features()).collect(),
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }
}

/// Learner configuration, as used by the comparison harness and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Tree(TreeParams),
    Forest(ForestParams),
    Adaboost(BoostParams),
    Knn { k: usize },
}

impl LearnerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Tree(_) => "tree",
            LearnerSpec::Forest(_) => "forest",
            LearnerSpec::Adaboost(_) => "adaboost",
            LearnerSpec::Knn { .. } => "knn",
        }
    }

    /// Default configurations of the four implemented learners.
    pub fn defaults() -> Vec<LearnerSpec> {
        vec![
            LearnerSpec::Tree(TreeParams::default()),
            LearnerSpec::Forest(ForestParams::default()),
            LearnerSpec::Adaboost(BoostParams::default()),
            LearnerSpec::Knn { k: knn::DEFAULT_K },
        ]
    }

    pub fn fit<T: Scalar>(&self, ds: &Dataset<T>, seed: u64) -> Result<TrainedModel<T>> {
        let set = TrainingSet::from_dataset(ds)?;
        Ok(match self {
            LearnerSpec::Tree(p) => TrainedModel::Tree(train_tree(&set, None, p, seed)?),
            LearnerSpec::Forest(p) => TrainedModel::Forest(train_forest(&set, None, p, seed)?),
            LearnerSpec::Adaboost(p) => TrainedModel::Boost(train_adaboost(&set, p, seed)?),
            LearnerSpec::Knn { k } => TrainedModel::Knn(KnnModel::fit(&set, *k)?),
        })
    }
}

/// Any trained learner.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel<T> {
    Tree(TreeModel<T>),
    Forest(ForestModel<T>),
    Boost(BoostModel<T>),
    Knn(KnnModel<T>),
}

impl<T: Scalar> TrainedModel<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Tree(_) => "tree",
            TrainedModel::Forest(_) => "forest",
            TrainedModel::Boost(_) => "adaboost",
            TrainedModel::Knn(_) => "knn",
        }
    }
}

impl<T: Scalar> Classifier<T> for TrainedModel<T> {
    fn classes(&self) -> &[GrammageClass] {
        match self {
            TrainedModel::Tree(m) => m.classes(),
            TrainedModel::Forest(m) => m.classes(),
            TrainedModel::Boost(m) => m.classes(),
            TrainedModel::Knn(m) => m.classes(),
        }
    }

    fn predict_proba(&self, x: &RollMeasurement<T>) -> ClassDistribution<T> {
        match self {
            TrainedModel::Tree(m) => m.predict_proba(x),
            TrainedModel::Forest(m) => m.predict_proba(x),
            TrainedModel::Boost(m) => m.predict_proba(x),
            TrainedModel::Knn(m) => m.predict_proba(x),
        }
    }

    fn predict(&self, x: &RollMeasurement<T>) -> GrammageClass {
        match self {
            TrainedModel::Tree(m) => m.predict(x),
            TrainedModel::Forest(m) => m.predict(x),
            TrainedModel::Boost(m) => m.predict(x),
            TrainedModel::Knn(m) => m.predict(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.0f32, 0.0, 0.0]), 0);
    }

    #[test]
    fn distribution_from_counts() {
        let d = ClassDistribution::from_counts(&[3.0, 1.0]).unwrap();
        assert_eq!(d.0, vec![0.75, 0.25]);
        assert!(ClassDistribution::<f64>::from_counts(&[0.0, 0.0]).is_none());
    }
}
