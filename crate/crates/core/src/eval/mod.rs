//! Splitting, metrics, cross-validation and learner comparison.

mod metrics;
mod split;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{class_counts, Dataset, GrammageClass};
use crate::error::{Error, Result};
use crate::learners::{Classifier, LearnerSpec};
use crate::scalar::Scalar;

pub use metrics::{
    column_normalize, confusion_matrix, metrics, render_normalized, render_percent, Averaged, ConfusionMatrix,
    MetricsReport,
};
pub use split::{
    apportion, require_classes, stratified_folds, stratified_split, stratified_split_indices, SplitIndices,
};

/// Hold-out fraction used by the comparison protocol.
pub const DEFAULT_TRAIN_RATIO: f64 = 0.70;

/// Confusion matrix of `model` on `ds`. Its class list is the union of the
/// model's classes and those present in `ds`.
pub fn evaluate<T: Scalar, M: Classifier<T> + ?Sized>(model: &M, ds: &Dataset<T>) -> Result<ConfusionMatrix> {
    let mut classes: Vec<GrammageClass> = model.classes().iter().chain(ds.classes()).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    let predicted: Vec<GrammageClass> = ds.iter().map(|i| model.predict(&i.measurement)).collect();
    confusion_matrix(&ds.labels(), &predicted, &classes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<MetricsReport>,
    pub mean_ca: f64,
    /// Sample standard deviation of fold accuracies.
    pub std_ca: f64,
}

pub fn cross_validate<T: Scalar>(spec: &LearnerSpec, ds: &Dataset<T>, k_folds: usize, seed: u64) -> Result<CvReport> {
    if k_folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k_folds}")));
    }
    for (class, n) in class_counts(ds) {
        if n < k_folds {
            return Err(Error::InsufficientData(format!(
                "class {class} has {n} rows, fewer than {k_folds} folds"
            )));
        }
    }
    let fold_of = stratified_folds(ds, k_folds, seed)?;
    let folds = (0..k_folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| fold_of[i] == f);
            let model = spec.fit(&ds.subset(&train), seed)?;
            metrics(&evaluate(&model, &ds.subset(&test))?)
        })
        .collect::<Result<Vec<_>>>()?;
    let cas: Vec<f64> = folds.iter().map(|m| m.accuracy).collect();
    let mean_ca = cas.iter().sum::<f64>() / k_folds as f64;
    let var = cas.iter().map(|c| (c - mean_ca).powi(2)).sum::<f64>() / (k_folds - 1) as f64;
    Ok(CvReport {
        folds,
        mean_ca,
        std_ca: var.sqrt(),
    })
}

/// One learner's line in a comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub learner: String,
    pub ca: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub precision_weighted: f64,
    pub recall_weighted: f64,
    pub confusion: Vec<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ComparisonRow {
    /// Scores one learner from its held-out confusion matrix.
    pub fn from_confusion(learner: &str, cm: &ConfusionMatrix) -> Result<Self> {
        let m = metrics(cm)?;
        Ok(ComparisonRow {
            learner: learner.to_string(),
            ca: m.accuracy,
            precision_macro: m.precision.macro_avg,
            recall_macro: m.recall.macro_avg,
            precision_weighted: m.precision.weighted,
            recall_weighted: m.recall.weighted,
            confusion: cm.counts.clone(),
            error: None,
        })
    }

    fn failed(learner: &str, err: Error) -> Self {
        ComparisonRow {
            learner: learner.to_string(),
            ca: 0.0,
            precision_macro: 0.0,
            recall_macro: 0.0,
            precision_weighted: 0.0,
            recall_weighted: 0.0,
            confusion: Vec::new(),
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub classes: Vec<GrammageClass>,
    pub train_size: usize,
    pub test_size: usize,
    /// Successful rows by CA descending then learner name, failed rows last.
    pub rows: Vec<ComparisonRow>,
    /// Column-normalised confusion matrix of the top row, in percent.
    pub winner_normalized: Option<Vec<Vec<f64>>>,
}

impl Comparison {
    pub fn row(&self, learner: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.learner == learner)
    }

    pub fn render_table(&self) -> String {
        let mut out = format!(
            "{:<10} {:>7} {:>9} {:>9} {:>9} {:>9}\n",
            "learner", "CA", "P(macro)", "R(macro)", "P(wtd)", "R(wtd)"
        );
        for r in &self.rows {
            match &r.error {
                Some(e) => out.push_str(&format!("{:<10} error: {e}\n", r.learner)),
                None => out.push_str(&format!(
                    "{:<10} {:>7.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4}\n",
                    r.learner, r.ca, r.precision_macro, r.recall_macro, r.precision_weighted, r.recall_weighted
                )),
            }
        }
        out
    }
}

/// Trains every spec on one stratified split and scores it on the held-out
/// side. A failing learner yields an error row; the others still run.
pub fn compare_learners<T: Scalar>(ds: &Dataset<T>, specs: &[LearnerSpec], seed: u64) -> Result<Comparison> {
    if specs.is_empty() {
        return Err(Error::Config("no learners to compare".into()));
    }
    let (train, test) = stratified_split(ds, DEFAULT_TRAIN_RATIO, seed)?;
    let mut rows: Vec<(ComparisonRow, Option<ConfusionMatrix>)> = specs
        .par_iter()
        .map(|spec| {
            let run = || -> Result<(ComparisonRow, ConfusionMatrix)> {
                let model = spec.fit(&train, seed)?;
                let cm = evaluate(&model, &test)?;
                Ok((ComparisonRow::from_confusion(spec.name(), &cm)?, cm))
            };
            match run() {
                Ok((row, cm)) => (row, Some(cm)),
                Err(e) => (ComparisonRow::failed(spec.name(), e), None),
            }
        })
        .collect();
    rows.sort_by(|(a, _), (b, _)| {
        a.error
            .is_some()
            .cmp(&b.error.is_some())
            .then(b.ca.partial_cmp(&a.ca).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.learner.cmp(&b.learner))
    });
    let winner_normalized = rows.first().and_then(|(_, cm)| cm.as_ref()).map(column_normalize);
    Ok(Comparison {
        classes: ds.classes().to_vec(),
        train_size: train.len(),
        test_size: test.len(),
        rows: rows.into_iter().map(|(r, _)| r).collect(),
        winner_normalized,
    })
}
