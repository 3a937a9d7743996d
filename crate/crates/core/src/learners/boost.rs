//! Multi-class real AdaBoost (SAMME.R) over forest base learners.
//!
//! Each stage fits a forest to the current row weights and turns its class
//! probabilities into additive scores
//! `h_k(x) = (K − 1)(log p_k(x) − mean_j log p_j(x))`, which sum to zero over
//! classes. Row weights are then multiplied by
//! `exp(−ν (K − 1)/K · yᵀ log p(x))`, where `y` codes the true class as 1 and
//! every other class as `−1/(K − 1)`, and renormalised. The model predicts the
//! argmax of `Σ_stages ν h(x)`.

use serde::{Deserialize, Serialize};

use super::forest::{forest_predict_proba, train_forest, ForestModel, ForestParams};
use super::{argmax, ClassDistribution, Classifier, TrainingSet};
use crate::domain::{GrammageClass, RollMeasurement};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::scalar::Scalar;

/// Probabilities are clipped to this floor before taking logs.
pub const PROBA_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub base: ForestParams,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_stages: 10,
            learning_rate: 1.0,
            base: ForestParams::boost_base(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostStage<T> {
    pub forest: ForestModel<T>,
    /// Additive weight of this stage's scores; always the learning rate.
    pub weight: T,
    /// Weighted training error of the forest's argmax under the weights it
    /// was fitted with.
    pub weighted_error: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostModel<T> {
    pub stages: Vec<BoostStage<T>>,
    pub params: BoostParams,
    pub classes: Vec<GrammageClass>,
    /// Weak-learner condition violations, one message per offending stage.
    pub warnings: Vec<String>,
}

/// Row weights before every stage, and after the last.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostTrace<T> {
    pub weights: Vec<Vec<T>>,
}

/// SAMME.R additive scores for one probability vector.
pub fn samme_r_scores<T: Scalar>(p: &[T]) -> Vec<T> {
    let k = p.len();
    let floor = T::lit(PROBA_FLOOR);
    let logs: Vec<T> = p.iter().map(|&v| v.max(floor).min(T::one()).ln()).collect();
    let mean = logs.iter().copied().sum::<T>() / T::lit(k as f64);
    let scale = T::lit(k as f64 - 1.0);
    logs.into_iter().map(|l| scale * (l - mean)).collect()
}

pub fn train_adaboost<T: Scalar>(set: &TrainingSet<T>, params: &BoostParams, seed: u64) -> Result<BoostModel<T>> {
    train_adaboost_traced(set, params, seed).map(|(m, _)| m)
}

pub fn train_adaboost_traced<T: Scalar>(
    set: &TrainingSet<T>,
    params: &BoostParams,
    seed: u64,
) -> Result<(BoostModel<T>, BoostTrace<T>)> {
    let k = set.n_classes();
    if k < 2 {
        return Err(Error::InsufficientData(format!(
            "boosting needs at least 2 classes, found {k}"
        )));
    }
    if params.n_stages == 0 {
        return Err(Error::Config("n_stages must be at least 1".into()));
    }
    if !(params.learning_rate > 0.0) || !params.learning_rate.is_finite() {
        return Err(Error::Config(format!(
            "learning_rate must be positive, got {}",
            params.learning_rate
        )));
    }
    let n = set.len();
    let kt = T::lit(k as f64);
    let nu = T::lit(params.learning_rate);
    let other = -T::one() / (kt - T::one());
    let exponent_scale = -nu * (kt - T::one()) / kt;
    let chance_error = (kt - T::one()) / kt;
    let floor = T::lit(PROBA_FLOOR);

    let mut weights = vec![T::one() / T::lit(n as f64); n];
    let mut trace = vec![weights.clone()];
    let mut stages = Vec::with_capacity(params.n_stages);
    let mut warnings = Vec::new();

    for m in 0..params.n_stages {
        let stage_seed = rng::derive_seed(seed, Purpose::Stage, m as u64);
        let forest = train_forest(set, Some(&weights), &params.base, stage_seed)?;
        let probas: Vec<ClassDistribution<T>> = set
            .features
            .iter()
            .map(|f| forest_predict_proba(&forest, &RollMeasurement::from_features(*f)))
            .collect();
        let weighted_error: T = probas
            .iter()
            .zip(&set.labels)
            .zip(&weights)
            .filter(|((p, &y), _)| p.argmax() != y)
            .map(|(_, &w)| w)
            .sum();
        if !(weighted_error < chance_error) {
            warnings.push(format!(
                "stage {m}: weighted error {weighted_error} is not below (K-1)/K = {chance_error}"
            ));
        }
        stages.push(BoostStage {
            forest,
            weight: nu,
            weighted_error,
        });
        if weighted_error <= T::zero() {
            break;
        }

        for ((w, p), &y) in weights.iter_mut().zip(&probas).zip(&set.labels) {
            let dot: T = p
                .0
                .iter()
                .enumerate()
                .map(|(c, &pc)| {
                    let code = if c == y { T::one() } else { other };
                    code * pc.max(floor).ln()
                })
                .sum();
            *w = *w * (exponent_scale * dot).exp();
        }
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) || !total.is_finite() {
            return Err(Error::Numeric(format!(
                "boosting weights degenerate after stage {m} (sum {total})"
            )));
        }
        for w in weights.iter_mut() {
            *w = *w / total;
        }
        if weights.iter().any(|w| !(*w > T::zero()) || !w.is_finite()) {
            return Err(Error::Numeric(format!(
                "boosting weight underflow after stage {m}"
            )));
        }
        trace.push(weights.clone());
    }

    Ok((
        BoostModel {
            stages,
            params: *params,
            classes: set.classes.clone(),
            warnings,
        },
        BoostTrace { weights: trace },
    ))
}

impl<T: Scalar> BoostModel<T> {
    /// Per-stage weighted score vectors at `x`.
    pub fn stage_scores(&self, x: &RollMeasurement<T>) -> Vec<Vec<T>> {
        self.stages
            .iter()
            .map(|s| {
                let p = forest_predict_proba(&s.forest, x);
                samme_r_scores(&p.0).into_iter().map(|h| s.weight * h).collect()
            })
            .collect()
    }

    pub fn scores(&self, x: &RollMeasurement<T>) -> Vec<T> {
        let mut total = vec![T::zero(); self.classes.len()];
        for stage in self.stage_scores(x) {
            for (t, h) in total.iter_mut().zip(stage) {
                *t = *t + h;
            }
        }
        total
    }
}

/// Predicted class (ties go to the lower grammage) and the summed scores.
pub fn boost_predict<T: Scalar>(model: &BoostModel<T>, x: &RollMeasurement<T>) -> (GrammageClass, Vec<T>) {
    let scores = model.scores(x);
    (model.classes[argmax(&scores)], scores)
}

/// Softmax of the score vector.
fn softmax<T: Scalar>(scores: &[T]) -> Vec<T> {
    let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl<T: Scalar> Classifier<T> for BoostModel<T> {
    fn classes(&self) -> &[GrammageClass] {
        &self.classes
    }

    fn predict_proba(&self, x: &RollMeasurement<T>) -> ClassDistribution<T> {
        ClassDistribution(softmax(&self.scores(x)))
    }

    fn predict(&self, x: &RollMeasurement<T>) -> GrammageClass {
        boost_predict(self, x).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Dataset, LabeledInstance};
    use crate::learners::tree::TreeNode;

    #[test]
    fn uniform_probabilities_score_zero() {
        for k in 2..7 {
            let p = vec![1.0 / k as f64; k];
            assert!(samme_r_scores(&p).iter().all(|h| h.abs() < 1e-12));
        }
    }

    #[test]
    fn two_class_scores_are_half_log_odds_times_k_minus_one() {
        let h = samme_r_scores(&[0.9, 0.1]);
        // (K-1)(ln p - mean ln p) = ±½ ln 9 for K = 2
        assert!((h[0] - 0.5 * 9f64.ln()).abs() < 1e-12);
        assert!((h[0] - 1.0986).abs() < 1e-4);
        assert!((h[1] + 1.0986).abs() < 1e-4);
    }

    #[test]
    fn clipped_scores_are_finite() {
        let h: Vec<f64> = samme_r_scores(&[1.0, 0.0]);
        assert!(h.iter().all(|v| v.is_finite()));
        assert!(h[0] > 0.0);
        let h: Vec<f32> = samme_r_scores(&[0.0f32, 0.3, 0.7]);
        assert!(h.iter().all(|v| v.is_finite()));
        assert!(h.iter().sum::<f32>().abs() < 1e-3);
    }

    fn toy_set() -> TrainingSet<f64> {
        let ds = Dataset::new(
            (0..90)
                .map(|i| {
                    let x = i as f64;
                    let label = match i % 3 {
                        0 => 48,
                        1 => 58,
                        _ => 70,
                    };
                    LabeledInstance {
                        measurement: RollMeasurement::from_features([
                            100.0 * (i % 3) as f64 + (x * 7.0) % 60.0,
                            500.0 + (x * 13.0) % 90.0,
                            300.0 + 40.0 * (i % 3) as f64 + (x * 3.0) % 50.0,
                        ]),
                        label: GrammageClass(label),
                    }
                })
                .collect(),
        );
        TrainingSet::from_dataset(&ds).unwrap()
    }

    #[test]
    fn single_stage_matches_base_forest() {
        let set = toy_set();
        let params = BoostParams {
            n_stages: 1,
            ..BoostParams::default()
        };
        let model = train_adaboost(&set, &params, 4).unwrap();
        let base = &model.stages[0].forest;
        for f in &set.features {
            let x = RollMeasurement::from_features(*f);
            assert_eq!(model.predict(&x), base.predict(&x));
        }
    }

    #[test]
    fn weights_stay_normalised_and_positive() {
        let set = toy_set();
        let (model, trace) = train_adaboost_traced(&set, &BoostParams::default(), 11).unwrap();
        assert_eq!(trace.weights.len(), model.stages.len() + 1 - usize::from(model.stages.last().unwrap().weighted_error == 0.0));
        for w in &trace.weights {
            let s: f64 = w.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(w.iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn scores_sum_to_zero() {
        let set = toy_set();
        let model = train_adaboost(&set, &BoostParams::default(), 5).unwrap();
        for f in &set.features {
            let x = RollMeasurement::from_features(*f);
            for s in model.stage_scores(&x) {
                assert!(s.iter().sum::<f64>().abs() < 1e-8);
            }
            assert!(model.scores(&x).iter().sum::<f64>().abs() < 1e-8 * model.stages.len() as f64);
        }
    }

    #[test]
    fn uniform_stages_predict_lowest_class() {
        let set = toy_set();
        let mut model = train_adaboost(&set, &BoostParams { n_stages: 2, ..BoostParams::default() }, 1).unwrap();
        for stage in &mut model.stages {
            for tree in &mut stage.forest.trees {
                for node in &mut tree.nodes {
                    if let TreeNode::Leaf { counts, distribution } = node {
                        counts.iter_mut().for_each(|c| *c = 1.0);
                        *distribution = ClassDistribution::uniform(counts.len());
                    }
                }
            }
        }
        let (class, scores) = boost_predict(&model, &RollMeasurement::from_features([1.0, 2.0, 3.0]));
        assert!(scores.iter().all(|s| s.abs() < 1e-12));
        assert_eq!(class, GrammageClass(48));
    }

    #[test]
    fn single_class_is_rejected() {
        let ds = Dataset::new(vec![
            LabeledInstance {
                measurement: RollMeasurement::from_features([1.0, 1.0, 1.0]),
                label: GrammageClass(70),
            };
            5
        ]);
        let set = TrainingSet::from_dataset(&ds).unwrap();
        assert!(matches!(
            train_adaboost(&set, &BoostParams::default(), 0),
            Err(Error::InsufficientData(_))
        ));
        assert!(train_adaboost(&toy_set(), &BoostParams { n_stages: 0, ..BoostParams::default() }, 0).is_err());
    }

    #[test]
    fn proba_is_softmax_of_scores() {
        let set = toy_set();
        let model = train_adaboost(&set, &BoostParams::default(), 2).unwrap();
        let x = RollMeasurement::from_features(set.features[7]);
        let p = model.predict_proba(&x);
        assert!((p.0.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(p.argmax(), argmax(&model.scores(&x)));
    }
}
