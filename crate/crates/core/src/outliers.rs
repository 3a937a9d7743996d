//! Elliptic-envelope outlier removal.
//!
//! The envelope is the sample mean and ridge-regularised sample covariance of
//! all rows. Rows are ranked by Mahalanobis distance and the farthest
//! `round(contamination · n)` are removed. Distances use raw units; the
//! metric is affine invariant so no scaling is needed.

use std::cmp::Ordering;

use crate::domain::{Dataset, RollMeasurement};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Mat3<T> = [[T; 3]; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeModel<T> {
    pub mean: [T; 3],
    pub covariance: Mat3<T>,
    pub inverse_covariance: Mat3<T>,
}

/// Relative ridge added to the covariance diagonal (times trace / 3).
pub const RIDGE: f64 = 1e-6;

pub fn fit_envelope<T: Scalar>(rows: &[RollMeasurement<T>]) -> Result<EnvelopeModel<T>> {
    let n = rows.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!(
            "envelope needs at least 4 rows, got {n}"
        )));
    }
    let nt = T::lit(n as f64);
    let mut mean = [T::zero(); 3];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.features()) {
            *m = *m + v;
        }
    }
    mean = mean.map(|m| m / nt);

    let mut cov = [[T::zero(); 3]; 3];
    for r in rows {
        let f = r.features();
        let d = [f[0] - mean[0], f[1] - mean[1], f[2] - mean[2]];
        for i in 0..3 {
            for j in i..3 {
                cov[i][j] = cov[i][j] + d[i] * d[j];
            }
        }
    }
    let denom = T::lit((n - 1) as f64);
    for i in 0..3 {
        for j in i..3 {
            cov[i][j] = cov[i][j] / denom;
            cov[j][i] = cov[i][j];
        }
    }
    let trace = cov[0][0] + cov[1][1] + cov[2][2];
    let ridge = T::lit(RIDGE) * trace / T::lit(3.0);
    for (i, row) in cov.iter_mut().enumerate() {
        row[i] = row[i] + ridge;
    }

    if !is_positive_definite(&cov) {
        return Err(Error::Numeric(
            "covariance is singular after regularisation".into(),
        ));
    }
    let inverse = invert(&cov)
        .ok_or_else(|| Error::Numeric("covariance is singular after regularisation".into()))?;
    let tol = T::lit(1e-8).max(T::epsilon() * T::lit(1e4));
    let product = mat_mul(&cov, &inverse);
    for (i, row) in product.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let target = if i == j { T::one() } else { T::zero() };
            if (*v - target).abs() > tol {
                return Err(Error::Numeric(format!(
                    "covariance inverse check failed at ({i},{j}): {v}"
                )));
            }
        }
    }
    Ok(EnvelopeModel {
        mean,
        covariance: cov,
        inverse_covariance: inverse,
    })
}

/// Sylvester's criterion, with minors compared against a scale-aware floor.
fn is_positive_definite<T: Scalar>(m: &Mat3<T>) -> bool {
    let scale = (m[0][0].abs() + m[1][1].abs() + m[2][2].abs()) / T::lit(3.0);
    if !(scale > T::zero()) || !scale.is_finite() {
        return false;
    }
    let floor = T::epsilon() * T::lit(16.0);
    let m1 = m[0][0] / scale;
    let m2 = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / (scale * scale);
    let m3 = det(m) / (scale * scale * scale);
    m1 > floor && m2 > floor && m3 > floor
}

fn det<T: Scalar>(m: &Mat3<T>) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn invert<T: Scalar>(m: &Mat3<T>) -> Option<Mat3<T>> {
    let d = det(m);
    if d == T::zero() || !d.is_finite() {
        return None;
    }
    let c = |r0: usize, c0: usize, r1: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [c(1, 1, 2, 2), -c(0, 1, 2, 2), c(0, 1, 1, 2)],
        [-c(1, 0, 2, 2), c(0, 0, 2, 2), -c(0, 0, 1, 2)],
        [c(1, 0, 2, 1), -c(0, 0, 2, 1), c(0, 0, 1, 1)],
    ];
    Some(adj.map(|row| row.map(|v| v / d)))
}

fn mat_mul<T: Scalar>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mahalanobis<T: Scalar>(x: &RollMeasurement<T>, model: &EnvelopeModel<T>) -> T {
    let f = x.features();
    let d = [
        f[0] - model.mean[0],
        f[1] - model.mean[1],
        f[2] - model.mean[2],
    ];
    let mut q = T::zero();
    for i in 0..3 {
        for j in 0..3 {
            q = q + d[i] * model.inverse_covariance[i][j] * d[j];
        }
    }
    q.max(T::zero()).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierSplit<T> {
    pub inliers: Dataset<T>,
    pub outliers: Dataset<T>,
    /// Row indices (into the input) flagged as outliers, ascending.
    pub outlier_rows: Vec<usize>,
    /// Mahalanobis distance of every input row; empty when nothing was removed.
    pub distances: Vec<T>,
}

pub fn filter_outliers<T: Scalar>(ds: &Dataset<T>, contamination: f64) -> Result<OutlierSplit<T>> {
    if !(0.0..1.0).contains(&contamination) {
        return Err(Error::Config(format!(
            "contamination must lie in [0, 1), got {contamination}"
        )));
    }
    let n = ds.len();
    let n_out = (contamination * n as f64).round() as usize;
    if n_out == 0 {
        return Ok(OutlierSplit {
            inliers: ds.clone(),
            outliers: Dataset::default(),
            outlier_rows: Vec::new(),
            distances: Vec::new(),
        });
    }
    let model = fit_envelope(&ds.measurements())?;
    let distances: Vec<T> = ds.iter().map(|i| mahalanobis(&i.measurement, &model)).collect();

    // Farthest first; among equal distances the later row goes first so the
    // earlier one survives the cut.
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&a, &b| {
        distances[b]
            .partial_cmp(&distances[a])
            .unwrap_or(Ordering::Equal)
            .then(b.cmp(&a))
    });
    let mut is_outlier = vec![false; n];
    for &i in &ranked[..n_out] {
        is_outlier[i] = true;
    }
    let (mut inl, mut out) = (Vec::new(), Vec::new());
    let mut outlier_rows = Vec::with_capacity(n_out);
    for (i, inst) in ds.iter().enumerate() {
        if is_outlier[i] {
            out.push(*inst);
            outlier_rows.push(i);
        } else {
            inl.push(*inst);
        }
    }
    Ok(OutlierSplit {
        inliers: Dataset::new(inl),
        outliers: Dataset::new(out),
        outlier_rows,
        distances,
    })
}
