//! Stratified hold-out split and k-fold assignment.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::domain::{Dataset, GrammageClass};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::scalar::Scalar;

/// Row indices of each side of a split, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn rows_by_class<T: Scalar>(ds: &Dataset<T>) -> BTreeMap<GrammageClass, Vec<usize>> {
    let mut by_class: BTreeMap<GrammageClass, Vec<usize>> = BTreeMap::new();
    for (i, inst) in ds.iter().enumerate() {
        by_class.entry(inst.label).or_default().push(i);
    }
    by_class
}

/// Largest-remainder apportionment of `total` seats over `counts` in
/// proportion to `ratio · count`. Remainder ties go to the earlier entry.
pub fn apportion(counts: &[usize], ratio: f64, total: usize) -> Vec<usize> {
    let quotas: Vec<f64> = counts.iter().map(|&c| ratio * c as f64).collect();
    let mut seats: Vec<usize> = quotas
        .iter()
        .zip(counts)
        .map(|(q, &c)| (q.floor() as usize).min(c))
        .collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    // Stable sort keeps ascending-class order among equal remainders.
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut left = total.saturating_sub(seats.iter().sum());
    // More than one pass only when `total` is far from Σ ratio·count.
    while left > 0 {
        let before = left;
        for &i in &order {
            if left == 0 {
                break;
            }
            if seats[i] < counts[i] {
                seats[i] += 1;
                left -= 1;
            }
        }
        if left == before {
            break;
        }
    }
    seats
}

/// Fails with [`Error::EmptyClass`] naming the first expected class that has
/// no rows in `ds`.
pub fn require_classes<T: Scalar>(ds: &Dataset<T>, expected: &[GrammageClass]) -> Result<()> {
    match expected.iter().find(|c| ds.classes().binary_search(c).is_err()) {
        Some(&c) => Err(Error::EmptyClass(c)),
        None => Ok(()),
    }
}

pub fn stratified_split_indices<T: Scalar>(ds: &Dataset<T>, train_ratio: f64, seed: u64) -> Result<SplitIndices> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::Config(format!("train ratio must be in (0, 1), got {train_ratio}")));
    }
    if ds.is_empty() {
        return Err(Error::InsufficientData("cannot split an empty dataset".into()));
    }
    let by_class = rows_by_class(ds);
    let counts: Vec<usize> = by_class.values().map(Vec::len).collect();
    let target = (train_ratio * ds.len() as f64).round() as usize;
    let seats = apportion(&counts, train_ratio, target);

    let mut in_train = vec![false; ds.len()];
    for ((class, rows), &take) in by_class.iter().zip(&seats) {
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rng::stream(seed, Purpose::Split, u64::from(class.gsm())));
        for &i in &shuffled[..take] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| in_train[i]);
    Ok(SplitIndices { train, test })
}

/// Splits into `(train, test)` with `round(ratio · n)` training rows,
/// apportioned per class. Both sides keep the original row order.
pub fn stratified_split<T: Scalar>(ds: &Dataset<T>, train_ratio: f64, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
    let idx = stratified_split_indices(ds, train_ratio, seed)?;
    Ok((ds.subset(&idx.train), ds.subset(&idx.test)))
}

/// Fold number of every row. Each class is shuffled and dealt round-robin,
/// the dealing cursor carrying over from one class to the next, so both fold
/// sizes and per-class fold counts differ by at most one.
pub fn stratified_folds<T: Scalar>(ds: &Dataset<T>, k_folds: usize, seed: u64) -> Result<Vec<usize>> {
    if k_folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k_folds}")));
    }
    if k_folds > ds.len() {
        return Err(Error::InsufficientData(format!(
            "{} rows cannot fill {k_folds} folds",
            ds.len()
        )));
    }
    let mut fold = vec![0; ds.len()];
    let mut cursor = 0;
    for (class, rows) in rows_by_class(ds) {
        let mut shuffled = rows;
        shuffled.shuffle(&mut rng::stream(seed, Purpose::Fold, u64::from(class.gsm())));
        for i in shuffled {
            fold[i] = cursor % k_folds;
            cursor += 1;
        }
    }
    Ok(fold)
}
