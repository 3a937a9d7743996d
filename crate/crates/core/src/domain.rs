//! Roll measurements, grammage labels and the plain-text dataset format.
//!
//! A dataset file holds one roll per line: `diameter width weight grammage`,
//! whitespace separated, no header. Blank lines and lines whose first
//! non-blank character is `#` are skipped. Both LF and CRLF endings parse.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Canonical grammage classes of the mill, ascending.
pub const CANONICAL_CLASSES: [GrammageClass; 6] = [
    GrammageClass(48),
    GrammageClass(50),
    GrammageClass(58),
    GrammageClass(60),
    GrammageClass(68),
    GrammageClass(70),
];

pub const MAX_DIAMETER_MM: f64 = 2000.0;
pub const MAX_WIDTH_MM: f64 = 6000.0;
pub const MAX_WEIGHT_KG: f64 = 5000.0;

/// Paper grammage in grams per square meter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GrammageClass(pub u16);

impl GrammageClass {
    pub fn gsm(self) -> u16 {
        self.0
    }

    /// `false` for labels outside the canonical set (such as 54).
    pub fn is_standard(self) -> bool {
        CANONICAL_CLASSES.contains(&self)
    }

    pub fn canonical(value: u16) -> Result<Self> {
        let class = GrammageClass(value);
        if class.is_standard() {
            Ok(class)
        } else {
            Err(Error::UnknownClass(class))
        }
    }
}

impl fmt::Display for GrammageClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Sensor triple measured on one roll: diameter (mm), width (mm), weight (kg).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollMeasurement<T> {
    pub diameter: T,
    pub width: T,
    pub weight: T,
}

impl<T: Scalar> RollMeasurement<T> {
    pub fn new(diameter: T, width: T, weight: T) -> Result<Self> {
        let m = RollMeasurement {
            diameter,
            width,
            weight,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("diameter", self.diameter, MAX_DIAMETER_MM),
            ("width", self.width, MAX_WIDTH_MM),
            ("weight", self.weight, MAX_WEIGHT_KG),
        ];
        for (name, value, max) in checks {
            if !value.is_finite() || value <= T::zero() {
                return Err(Error::InvalidMeasurement(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
            if value > T::lit(max) {
                return Err(Error::InvalidMeasurement(format!(
                    "{name} {value} exceeds plausibility bound {max}"
                )));
            }
        }
        Ok(())
    }

    /// Feature vector in model order.
    pub fn features(&self) -> [T; 3] {
        [self.diameter, self.width, self.weight]
    }

    pub fn from_features(f: [T; 3]) -> Self {
        RollMeasurement {
            diameter: f[0],
            width: f[1],
            weight: f[2],
        }
    }

    pub fn cast<U: Scalar>(&self) -> RollMeasurement<U> {
        RollMeasurement {
            diameter: U::lit(self.diameter.to_f64_lossy()),
            width: U::lit(self.width.to_f64_lossy()),
            weight: U::lit(self.weight.to_f64_lossy()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance<T> {
    pub measurement: RollMeasurement<T>,
    pub label: GrammageClass,
}

impl<T> LabeledInstance<T> {
    pub fn is_nonstandard(&self) -> bool {
        !self.label.is_standard()
    }
}

/// Ordered collection of labeled rolls plus the sorted set of labels present.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    instances: Vec<LabeledInstance<T>>,
    classes: Vec<GrammageClass>,
}

impl<T: Scalar> Default for Dataset<T> {
    fn default() -> Self {
        Dataset::new(Vec::new())
    }
}

impl<T: Scalar> Dataset<T> {
    pub fn new(instances: Vec<LabeledInstance<T>>) -> Self {
        let mut classes: Vec<GrammageClass> = instances.iter().map(|i| i.label).collect();
        classes.sort_unstable();
        classes.dedup();
        Dataset { instances, classes }
    }

    pub fn instances(&self) -> &[LabeledInstance<T>] {
        &self.instances
    }

    pub fn into_instances(self) -> Vec<LabeledInstance<T>> {
        self.instances
    }

    pub fn classes(&self) -> &[GrammageClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledInstance<T>> {
        self.instances.iter()
    }

    pub fn get(&self, index: usize) -> Option<&LabeledInstance<T>> {
        self.instances.get(index)
    }

    pub fn measurements(&self) -> Vec<RollMeasurement<T>> {
        self.instances.iter().map(|i| i.measurement).collect()
    }

    pub fn labels(&self) -> Vec<GrammageClass> {
        self.instances.iter().map(|i| i.label).collect()
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Dataset::new(indices.iter().map(|&i| self.instances[i]).collect())
    }

    /// Drops rows whose label is outside the canonical set; returns the
    /// filtered dataset and the number of rows removed.
    pub fn without_nonstandard(&self) -> (Self, usize) {
        let kept: Vec<_> = self
            .instances
            .iter()
            .filter(|i| !i.is_nonstandard())
            .copied()
            .collect();
        let removed = self.len() - kept.len();
        (Dataset::new(kept), removed)
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset::new(
            self.instances
                .iter()
                .map(|i| LabeledInstance {
                    measurement: i.measurement.cast(),
                    label: i.label,
                })
                .collect(),
        )
    }
}

impl<'a, T> IntoIterator for &'a Dataset<T> {
    type Item = &'a LabeledInstance<T>;
    type IntoIter = std::slice::Iter<'a, LabeledInstance<T>>;

    fn into_iter(self) -> Self::IntoIter {
        self.instances.iter()
    }
}

pub fn parse_dataset<T: Scalar>(text: &str) -> Result<Dataset<T>> {
    let mut instances = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let mut values = [T::zero(); 4];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field.parse::<T>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("not a number: {field:?}"),
            })?;
        }
        let measurement =
            RollMeasurement::new(values[0], values[1], values[2]).map_err(|e| {
                Error::Validation {
                    line: line_no,
                    message: e.to_string(),
                }
            })?;
        let label = parse_label(values[3]).ok_or_else(|| Error::Validation {
            line: line_no,
            message: format!("grammage must be a positive value below 65536, got {}", values[3]),
        })?;
        instances.push(LabeledInstance { measurement, label });
    }
    Ok(Dataset::new(instances))
}

fn parse_label<T: Scalar>(value: T) -> Option<GrammageClass> {
    let rounded = value.round().to_f64()?;
    if !(1.0..=f64::from(u16::MAX)).contains(&rounded) {
        return None;
    }
    Some(GrammageClass(rounded as u16))
}

pub fn write_dataset<T: Scalar>(ds: &Dataset<T>) -> String {
    let mut out = String::new();
    for i in ds.iter() {
        let m = &i.measurement;
        out.push_str(&format!(
            "{} {} {} {}\n",
            m.diameter, m.width, m.weight, i.label
        ));
    }
    out
}

pub fn class_counts<T: Scalar>(ds: &Dataset<T>) -> BTreeMap<GrammageClass, usize> {
    let mut counts = BTreeMap::new();
    for i in ds.iter() {
        *counts.entry(i.label).or_insert(0) += 1;
    }
    counts
}
