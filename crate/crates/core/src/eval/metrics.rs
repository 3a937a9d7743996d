//! Confusion matrices and the metrics derived from them.

use serde::{Deserialize, Serialize};

use crate::domain::GrammageClass;
use crate::error::{Error, Result};

/// Rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<GrammageClass>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: Vec<GrammageClass>) -> Self {
        let k = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; k]; k],
        }
    }

    fn index(&self, class: GrammageClass) -> Result<usize> {
        self.classes
            .iter()
            .position(|&c| c == class)
            .ok_or(Error::UnknownClass(class))
    }

    pub fn record(&mut self, actual: GrammageClass, predicted: GrammageClass) -> Result<()> {
        let a = self.index(actual)?;
        let p = self.index(predicted)?;
        self.counts[a][p] += 1;
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<u64> {
        (0..self.k()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }
}

pub fn confusion_matrix(
    actual: &[GrammageClass],
    predicted: &[GrammageClass],
    classes: &[GrammageClass],
) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(Error::Config(format!(
            "{} actual labels but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros(classes.to_vec());
    for (&a, &p) in actual.iter().zip(predicted) {
        cm.record(a, p)?;
    }
    Ok(cm)
}

/// Percentages per predicted column; all-zero columns stay zero.
pub fn column_normalize(cm: &ConfusionMatrix) -> Vec<Vec<f64>> {
    let cols = cm.column_sums();
    cm.counts
        .iter()
        .map(|row| {
            row.iter()
                .zip(&cols)
                .map(|(&c, &s)| if s == 0 { 0.0 } else { 100.0 * c as f64 / s as f64 })
                .collect()
        })
        .collect()
}

/// One decimal and a spaced percent sign, e.g. `97.7 %`.
pub fn render_percent(value: f64) -> String {
    format!("{value:.1} %")
}

/// Column-normalised matrix as text: a header of predicted classes, one line
/// per actual class, and a `Σ` line of raw column counts.
pub fn render_normalized(cm: &ConfusionMatrix) -> String {
    let pct = column_normalize(cm);
    let mut out = String::from("actual\\pred");
    for c in &cm.classes {
        out.push_str(&format!("{c:>9}"));
    }
    out.push('\n');
    for (c, row) in cm.classes.iter().zip(&pct) {
        out.push_str(&format!("{c:>11}"));
        for v in row {
            out.push_str(&format!("{:>9}", render_percent(*v)));
        }
        out.push('\n');
    }
    out.push_str(&format!("{:>11}", "Σ"));
    for s in cm.column_sums() {
        out.push_str(&format!("{s:>9}"));
    }
    out.push('\n');
    out
}

/// Per-class values with their unweighted and support-weighted means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Averaged {
    pub per_class: Vec<f64>,
    pub macro_avg: f64,
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<GrammageClass>,
    pub accuracy: f64,
    pub precision: Averaged,
    pub recall: Averaged,
    pub f1: Averaged,
    pub support: Vec<u64>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn average(per_class: Vec<f64>, support: &[u64], total: u64) -> Averaged {
    let macro_avg = per_class.iter().sum::<f64>() / per_class.len() as f64;
    let weighted = per_class
        .iter()
        .zip(support)
        .map(|(v, &s)| v * s as f64)
        .sum::<f64>()
        / total as f64;
    Averaged {
        per_class,
        macro_avg,
        weighted,
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InsufficientData("confusion matrix is empty".into()));
    }
    let rows = cm.row_sums();
    let cols = cm.column_sums();
    let diag: Vec<u64> = (0..cm.k()).map(|i| cm.counts[i][i]).collect();
    let precision: Vec<f64> = diag.iter().zip(&cols).map(|(&d, &c)| ratio(d, c)).collect();
    let recall: Vec<f64> = diag.iter().zip(&rows).map(|(&d, &r)| ratio(d, r)).collect();
    let f1: Vec<f64> = precision
        .iter()
        .zip(&recall)
        .map(|(&p, &r)| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
        .collect();
    Ok(MetricsReport {
        classes: cm.classes.clone(),
        accuracy: ratio(cm.trace(), total),
        precision: average(precision, &rows, total),
        recall: average(recall, &rows, total),
        f1: average(f1, &rows, total),
        support: rows,
    })
}
