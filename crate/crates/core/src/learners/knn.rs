//! k-nearest-neighbour baseline on z-scored features.

use super::{ClassDistribution, Classifier, TrainingSet};
use crate::domain::{GrammageClass, RollMeasurement};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_K: usize = 5;

/// Per-feature standardisation. Constant features get a unit scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaler<T> {
    pub mean: [T; 3],
    pub std: [T; 3],
}

impl<T: Scalar> Scaler<T> {
    pub fn apply(&self, f: &[T; 3]) -> [T; 3] {
        let mut out = [T::zero(); 3];
        for j in 0..3 {
            out[j] = (f[j] - self.mean[j]) / self.std[j];
        }
        out
    }
}

pub fn fit_scaler<T: Scalar>(rows: &[[T; 3]]) -> Result<Scaler<T>> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("cannot fit a scaler to no rows".into()));
    }
    let n = T::lit(rows.len() as f64);
    let mut mean = [T::zero(); 3];
    let mut std = [T::zero(); 3];
    for j in 0..3 {
        mean[j] = rows.iter().map(|r| r[j]).sum::<T>() / n;
        let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<T>() / n;
        let s = var.sqrt();
        std[j] = if s > T::zero() && s.is_finite() { s } else { T::one() };
    }
    Ok(Scaler { mean, std })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel<T> {
    pub k: usize,
    pub scaler: Scaler<T>,
    /// Scaled training rows.
    pub rows: Vec<[T; 3]>,
    pub labels: Vec<usize>,
    pub classes: Vec<GrammageClass>,
}

impl<T: Scalar> KnnModel<T> {
    pub fn fit(set: &TrainingSet<T>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        let scaler = fit_scaler(&set.features)?;
        Ok(KnnModel {
            k,
            scaler,
            rows: set.features.iter().map(|f| scaler.apply(f)).collect(),
            labels: set.labels.clone(),
            classes: set.classes.clone(),
        })
    }

    /// Training indices of the nearest rows, nearest first; equal distances
    /// are ordered by training index.
    pub fn neighbours(&self, x: &RollMeasurement<T>) -> Vec<usize> {
        let q = self.scaler.apply(&x.features());
        let mut d: Vec<(T, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let s = (0..3).map(|j| (r[j] - q[j]).powi(2)).sum::<T>();
                (s, i)
            })
            .collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(T, usize), b: &(T, usize)| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }
}

/// Majority vote among the `k` nearest rows; the lower class wins ties.
pub fn knn_predict<T: Scalar>(model: &KnnModel<T>, x: &RollMeasurement<T>) -> (GrammageClass, ClassDistribution<T>) {
    let mut votes = vec![T::zero(); model.classes.len()];
    for i in model.neighbours(x) {
        votes[model.labels[i]] = votes[model.labels[i]] + T::one();
    }
    let dist = ClassDistribution::from_counts(&votes).unwrap_or_else(|| ClassDistribution::uniform(votes.len()));
    (model.classes[dist.argmax()], dist)
}

impl<T: Scalar> Classifier<T> for KnnModel<T> {
    fn classes(&self) -> &[GrammageClass] {
        &self.classes
    }

    fn predict_proba(&self, x: &RollMeasurement<T>) -> ClassDistribution<T> {
        knn_predict(self, x).1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: Vec<([f64; 3], usize)>, classes: &[u16]) -> TrainingSet<f64> {
        TrainingSet {
            features: rows.iter().map(|r| r.0).collect(),
            labels: rows.iter().map(|r| r.1).collect(),
            classes: classes.iter().map(|&c| GrammageClass(c)).collect(),
        }
    }

    #[test]
    fn scaler_standardises() {
        let s = fit_scaler(&[[1.0, 5.0, 0.0], [3.0, 5.0, 4.0]]).unwrap();
        assert_eq!(s.mean, [2.0, 5.0, 2.0]);
        assert_eq!(s.std, [1.0, 1.0, 2.0]);
        assert_eq!(s.apply(&[3.0, 5.0, 0.0]), [1.0, 0.0, -1.0]);
    }

    #[test]
    fn one_nn_recovers_training_labels() {
        let t = set(
            vec![([0.0, 0.0, 0.0], 0), ([10.0, 0.0, 0.0], 1), ([0.0, 10.0, 0.0], 2)],
            &[48, 50, 70],
        );
        let m = KnnModel::fit(&t, 1).unwrap();
        for (f, &y) in t.features.iter().zip(&t.labels) {
            assert_eq!(m.predict(&RollMeasurement::from_features(*f)), t.classes[y]);
        }
    }

    #[test]
    fn distance_ties_prefer_lower_index() {
        // Both rows at distance 1 from the query; the earlier one is kept.
        let t = set(vec![([1.0, 0.0, 0.0], 1), ([-1.0, 0.0, 0.0], 0)], &[48, 70]);
        let m = KnnModel::fit(&t, 1).unwrap();
        assert_eq!(m.neighbours(&RollMeasurement::from_features([0.0, 0.0, 0.0])), vec![0]);
        assert_eq!(m.predict(&RollMeasurement::from_features([0.0, 0.0, 0.0])), GrammageClass(70));
    }

    #[test]
    fn vote_ties_prefer_lower_class() {
        let t = set(vec![([1.0, 0.0, 0.0], 1), ([-1.0, 0.0, 0.0], 0)], &[48, 70]);
        let m = KnnModel::fit(&t, 2).unwrap();
        let (c, d) = knn_predict(&m, &RollMeasurement::from_features([0.0, 0.0, 0.0]));
        assert_eq!(c, GrammageClass(48));
        assert_eq!(d.0, vec![0.5, 0.5]);
    }

    #[test]
    fn k_larger_than_data_uses_everything() {
        let t = set(vec![([0.0, 0.0, 0.0], 0), ([1.0, 0.0, 0.0], 1), ([2.0, 0.0, 0.0], 1)], &[48, 70]);
        let m = KnnModel::fit(&t, 50).unwrap();
        assert_eq!(m.neighbours(&RollMeasurement::from_features([0.0, 0.0, 0.0])).len(), 3);
        assert_eq!(m.predict(&RollMeasurement::from_features([0.0, 0.0, 0.0])), GrammageClass(70));
        assert!(KnnModel::fit(&t, 0).is_err());
    }
}
