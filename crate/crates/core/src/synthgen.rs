//! Synthetic roll generator.
//!
//! A roll of outer diameter `D` wound on a core of diameter `d` holds
//! `π(D² − d²) / (4 t)` meters of sheet of caliper `t`, and caliper is
//! `bulk × grammage`. Mass therefore depends on grammage only through bulk,
//! which is why the bulk table must decrease with grammage.
//!
//! Each class is produced in its own roll formats (diameter and width ranges),
//! mirroring the way a mill's grades go to different customers.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::{
    Dataset, GrammageClass, LabeledInstance, RollMeasurement, MAX_DIAMETER_MM, MAX_WEIGHT_KG,
    MAX_WIDTH_MM,
};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::scalar::Scalar;

/// Sheet length in meters wound between `core_diameter` and `outer_diameter`
/// (both mm) at `caliper` micrometers.
pub fn roll_length<T: Scalar>(outer_diameter: T, core_diameter: T, caliper: T) -> Result<T> {
    if !(caliper > T::zero()) {
        return Err(Error::Domain(format!("caliper must be positive, got {caliper}")));
    }
    if core_diameter < T::zero() || outer_diameter < core_diameter {
        return Err(Error::Domain(format!(
            "need outer diameter >= core diameter >= 0, got {outer_diameter} and {core_diameter}"
        )));
    }
    let mm = T::lit(1e-3);
    let outer = outer_diameter * mm;
    let core = core_diameter * mm;
    let thickness = caliper * T::lit(1e-6);
    Ok(T::lit(PI) * (outer * outer - core * core) / (T::lit(4.0) * thickness))
}

/// Roll mass in kg for a sheet of `grammage` gsm, `width` mm wide and
/// `length` m long.
pub fn roll_mass<T: Scalar>(grammage: T, width: T, length: T) -> T {
    grammage * (width / T::lit(1000.0)) * length / T::lit(1000.0)
}

/// Caliper in micrometers for a sheet of the given grammage and bulk (cm³/g).
pub fn caliper<T: Scalar>(grammage: T, bulk: T) -> T {
    bulk * grammage
}

pub fn caliper_for<T: Scalar>(class: GrammageClass, bulk_table: &BTreeMap<GrammageClass, f64>) -> Result<T> {
    let bulk = bulk_table
        .get(&class)
        .ok_or(Error::UnknownClass(class))?;
    Ok(caliper(T::lit(f64::from(class.gsm())), T::lit(*bulk)))
}

/// Exact mass of a roll with no sensor noise.
pub fn ideal_mass<T: Scalar>(
    class: GrammageClass,
    diameter: T,
    width: T,
    core_diameter: T,
    bulk_table: &BTreeMap<GrammageClass, f64>,
) -> Result<T> {
    let t = caliper_for::<T>(class, bulk_table)?;
    let length = roll_length(diameter, core_diameter, t)?;
    Ok(roll_mass(T::lit(f64::from(class.gsm())), width, length))
}

/// Bulk implied by a measured roll; inverts [`ideal_mass`].
pub fn implied_bulk<T: Scalar>(m: &RollMeasurement<T>, core_diameter: T) -> T {
    let mm = T::lit(1e-3);
    let outer = m.diameter * mm;
    let core = core_diameter * mm;
    let width = m.width * mm;
    width * T::lit(PI) * (outer * outer - core * core) * T::lit(1000.0) / (T::lit(4.0) * m.weight)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Range { min, max }
    }

    fn sample(&self, rng: &mut rng::Rng) -> f64 {
        if self.max > self.min {
            rng.random_range(self.min..self.max)
        } else {
            self.min
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollFormat {
    pub diameter: Range,
    pub width: Range,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n_instances: usize,
    /// mm
    pub core_diameter: f64,
    /// cm³/g per class
    pub bulk_table: BTreeMap<GrammageClass, f64>,
    pub class_weights: BTreeMap<GrammageClass, f64>,
    pub diameter_range: Range,
    pub width_range: Range,
    /// Per-class overrides of `diameter_range` / `width_range`.
    pub formats: BTreeMap<GrammageClass, RollFormat>,
    /// Relative standard deviation of each sensor channel.
    pub sensor_noise_sigma: f64,
    pub outlier_rate: f64,
    pub label_noise_rate: f64,
    pub seed: u64,
}

/// Row sums of the mill's confusion matrix, 48 → 70 gsm.
const DEFAULT_CLASS_COUNTS: [(u16, f64); 6] = [
    (48, 2141.0),
    (50, 316.0),
    (58, 209.0),
    (60, 4.0),
    (68, 57.0),
    (70, 2643.0),
];

const DEFAULT_BULK: [(u16, f64); 6] = [
    (48, 1.25),
    (50, 1.22),
    (58, 1.16),
    (60, 1.14),
    (68, 1.08),
    (70, 1.06),
];

const DEFAULT_FORMATS: [(u16, RollFormat); 6] = [
    (48, fmt(1100.0, 1250.0, 1400.0, 1800.0)),
    (50, fmt(1100.0, 1250.0, 1000.0, 1400.0)),
    (58, fmt(900.0, 1100.0, 1400.0, 1800.0)),
    (60, fmt(900.0, 1100.0, 1000.0, 1400.0)),
    (68, fmt(900.0, 1100.0, 600.0, 1000.0)),
    (70, fmt(900.0, 1100.0, 600.0, 1000.0)),
];

const fn fmt(d0: f64, d1: f64, w0: f64, w1: f64) -> RollFormat {
    RollFormat {
        diameter: Range::new(d0, d1),
        width: Range::new(w0, w1),
    }
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let total: f64 = DEFAULT_CLASS_COUNTS.iter().map(|(_, c)| c).sum();
        GeneratorConfig {
            n_instances: 9589,
            core_diameter: 100.0,
            bulk_table: DEFAULT_BULK
                .iter()
                .map(|&(g, b)| (GrammageClass(g), b))
                .collect(),
            class_weights: DEFAULT_CLASS_COUNTS
                .iter()
                .map(|&(g, c)| (GrammageClass(g), c / total))
                .collect(),
            diameter_range: Range::new(900.0, 1250.0),
            width_range: Range::new(600.0, 1800.0),
            formats: DEFAULT_FORMATS
                .iter()
                .map(|&(g, f)| (GrammageClass(g), f))
                .collect(),
            sensor_noise_sigma: 0.01,
            outlier_rate: 0.20,
            label_noise_rate: 0.01,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.class_weights.is_empty() {
            return fail("class_weights is empty".into());
        }
        let sum: f64 = self.class_weights.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return fail(format!("class_weights sum to {sum}, expected 1"));
        }
        if self.class_weights.values().any(|w| !(*w >= 0.0)) {
            return fail("class weights must be non-negative".into());
        }
        for class in self.class_weights.keys() {
            if !self.bulk_table.contains_key(class) {
                return fail(format!("no bulk value for class {class}"));
            }
        }
        let mut prev: Option<(GrammageClass, f64)> = None;
        for (&class, &bulk) in &self.bulk_table {
            if !(bulk > 0.0) || !bulk.is_finite() {
                return fail(format!("bulk for {class} must be positive, got {bulk}"));
            }
            if let Some((pc, pb)) = prev {
                if bulk >= pb {
                    return fail(format!(
                        "bulk must strictly decrease with grammage: {pc} has {pb}, {class} has {bulk}"
                    ));
                }
            }
            prev = Some((class, bulk));
        }
        for (name, rate) in [
            ("outlier_rate", self.outlier_rate),
            ("label_noise_rate", self.label_noise_rate),
        ] {
            if !(0.0..1.0).contains(&rate) {
                return fail(format!("{name} must lie in [0, 1), got {rate}"));
            }
        }
        if self.outlier_rate + self.label_noise_rate >= 1.0 {
            return fail("outlier_rate + label_noise_rate must be below 1".into());
        }
        if !(0.0..=0.1).contains(&self.sensor_noise_sigma) {
            return fail(format!(
                "sensor_noise_sigma must lie in [0, 0.1], got {}",
                self.sensor_noise_sigma
            ));
        }
        if !(self.core_diameter >= 0.0) {
            return fail("core_diameter must be non-negative".into());
        }
        let mut ranges = vec![
            ("diameter_range", self.diameter_range, MAX_DIAMETER_MM),
            ("width_range", self.width_range, MAX_WIDTH_MM),
        ];
        for f in self.formats.values() {
            ranges.push(("format diameter", f.diameter, MAX_DIAMETER_MM));
            ranges.push(("format width", f.width, MAX_WIDTH_MM));
        }
        for (name, r, max) in ranges {
            if !(r.min > 0.0 && r.min <= r.max && r.max <= max) {
                return fail(format!("{name} {}..{} is not a valid interval within (0, {max}]", r.min, r.max));
            }
        }
        for class in self.class_weights.keys() {
            if self.format_for(*class).diameter.min <= self.core_diameter {
                return fail(format!("diameters for {class} must exceed the core diameter"));
            }
        }
        Ok(())
    }

    pub fn format_for(&self, class: GrammageClass) -> RollFormat {
        self.formats.get(&class).copied().unwrap_or(RollFormat {
            diameter: self.diameter_range,
            width: self.width_range,
        })
    }

    pub fn classes(&self) -> Vec<GrammageClass> {
        self.class_weights.keys().copied().collect()
    }

    pub fn outlier_count(&self) -> usize {
        (self.outlier_rate * self.n_instances as f64).round() as usize
    }

    pub fn label_noise_count(&self) -> usize {
        (self.label_noise_rate * self.n_instances as f64).round() as usize
    }

    /// Flat `key = value` text form; see [`GeneratorConfig::from_kv`].
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_instances = {}", self.n_instances);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "core_diameter = {}", self.core_diameter);
        let _ = writeln!(s, "sensor_noise_sigma = {}", self.sensor_noise_sigma);
        let _ = writeln!(s, "outlier_rate = {}", self.outlier_rate);
        let _ = writeln!(s, "label_noise_rate = {}", self.label_noise_rate);
        let _ = writeln!(s, "diameter_range = {} {}", self.diameter_range.min, self.diameter_range.max);
        let _ = writeln!(s, "width_range = {} {}", self.width_range.min, self.width_range.max);
        for (c, b) in &self.bulk_table {
            let _ = writeln!(s, "bulk.{c} = {b}");
        }
        for (c, w) in &self.class_weights {
            let _ = writeln!(s, "weight.{c} = {w}");
        }
        for (c, f) in &self.formats {
            let _ = writeln!(
                s,
                "format.{c} = {} {} {} {}",
                f.diameter.min, f.diameter.max, f.width.min, f.width.max
            );
        }
        s
    }

    /// Parses the `key = value` form. Keys absent from the text keep their
    /// default; any `bulk.*`, `weight.*` or `format.*` key replaces the whole
    /// corresponding default table.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = GeneratorConfig::default();
        let mut bulk = BTreeMap::new();
        let mut weights = BTreeMap::new();
        let mut formats = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::Config(format!("line {}: {msg}", idx + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key = value"))?;
            let key = key.trim();
            let nums: Vec<f64> = value
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("value is not numeric"))?;
            let want = |n: usize| -> Result<()> {
                if nums.len() == n {
                    Ok(())
                } else {
                    Err(bad(&format!("{key} takes {n} value(s)")))
                }
            };
            let class = |suffix: &str| -> Result<GrammageClass> {
                suffix
                    .parse::<u16>()
                    .map(GrammageClass)
                    .map_err(|_| bad("class suffix must be an integer grammage"))
            };
            match key {
                "n_instances" => {
                    want(1)?;
                    cfg.n_instances = value.trim().parse().map_err(|_| bad("n_instances must be an integer"))?;
                }
                "seed" => {
                    want(1)?;
                    cfg.seed = value.trim().parse().map_err(|_| bad("seed must be an integer"))?;
                }
                "core_diameter" => {
                    want(1)?;
                    cfg.core_diameter = nums[0];
                }
                "sensor_noise_sigma" => {
                    want(1)?;
                    cfg.sensor_noise_sigma = nums[0];
                }
                "outlier_rate" => {
                    want(1)?;
                    cfg.outlier_rate = nums[0];
                }
                "label_noise_rate" => {
                    want(1)?;
                    cfg.label_noise_rate = nums[0];
                }
                "diameter_range" => {
                    want(2)?;
                    cfg.diameter_range = Range::new(nums[0], nums[1]);
                }
                "width_range" => {
                    want(2)?;
                    cfg.width_range = Range::new(nums[0], nums[1]);
                }
                k => {
                    if let Some(c) = k.strip_prefix("bulk.") {
                        want(1)?;
                        bulk.insert(class(c)?, nums[0]);
                    } else if let Some(c) = k.strip_prefix("weight.") {
                        want(1)?;
                        weights.insert(class(c)?, nums[0]);
                    } else if let Some(c) = k.strip_prefix("format.") {
                        want(4)?;
                        formats.insert(class(c)?, fmt(nums[0], nums[1], nums[2], nums[3]));
                    } else {
                        return Err(bad(&format!("unknown key {k:?}")));
                    }
                }
            }
        }
        if !bulk.is_empty() {
            cfg.bulk_table = bulk;
        }
        if !weights.is_empty() {
            cfg.class_weights = weights;
        }
        if !formats.is_empty() {
            cfg.formats = formats;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One generated roll before gross faults and label noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticRoll<T> {
    pub class: GrammageClass,
    /// Noise-free measurement.
    pub exact: RollMeasurement<T>,
    /// Measurement after multiplicative sensor noise.
    pub measured: RollMeasurement<T>,
}

/// Deterministic, random-access sequence of synthetic rolls. Roll `t`
/// depends only on `(config, t)`, never on which rolls were drawn before.
#[derive(Debug, Clone)]
pub struct RollStream {
    config: GeneratorConfig,
    classes: Vec<GrammageClass>,
    cumulative: Vec<f64>,
}

impl RollStream {
    pub fn new(config: GeneratorConfig) -> Result<Self> {
        config.validate()?;
        let classes = config.classes();
        let mut acc = 0.0;
        let cumulative = config
            .class_weights
            .values()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(RollStream {
            config,
            classes,
            cumulative,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn roll<T: Scalar>(&self, index: u64) -> SyntheticRoll<T> {
        let cfg = &self.config;
        let mut rng = rng::stream(cfg.seed, Purpose::Roll, index);
        let u: f64 = rng.random();
        let pos = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.classes.len() - 1);
        let class = self.classes[pos];
        let format = cfg.format_for(class);
        let diameter = format.diameter.sample(&mut rng);
        let width = format.width.sample(&mut rng);
        // validate() guarantees the class has a bulk entry and diameter > core
        let weight = ideal_mass(class, diameter, width, cfg.core_diameter, &cfg.bulk_table)
            .expect("validated generator config");
        let exact = [diameter, width, weight];
        let mut measured = [0.0; 3];
        for (ch, slot) in measured.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *slot = clamp_channel(ch, exact[ch] * (1.0 + cfg.sensor_noise_sigma * z));
        }
        SyntheticRoll {
            class,
            exact: RollMeasurement::from_features(exact.map(T::lit)),
            measured: RollMeasurement::from_features(measured.map(T::lit)),
        }
    }
}

const CHANNEL_MAX: [f64; 3] = [MAX_DIAMETER_MM, MAX_WIDTH_MM, MAX_WEIGHT_KG];

/// Keeps a channel value inside the sensor's measurable span.
fn clamp_channel(channel: usize, value: f64) -> f64 {
    value.clamp(1e-3, CHANNEL_MAX[channel])
}

/// A gross sensor fault: one channel scaled by a factor from
/// `[0.1, 0.5]` or `[2, 5]`, saturating at the channel's full scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrossFault {
    pub channel: usize,
    pub factor: f64,
}

impl GrossFault {
    pub fn draw(rng: &mut rng::Rng) -> Self {
        let channel = rng.random_range(0..3);
        let factor = if rng.random_bool(0.5) {
            rng.random_range(0.1..=0.5)
        } else {
            rng.random_range(2.0..=5.0)
        };
        GrossFault { channel, factor }
    }

    pub fn apply<T: Scalar>(&self, m: &RollMeasurement<T>) -> RollMeasurement<T> {
        let mut f = m.features().map(|v| v.to_f64_lossy());
        f[self.channel] = clamp_channel(self.channel, f[self.channel] * self.factor);
        RollMeasurement::from_features(f.map(T::lit))
    }
}

/// Which rows of a generated dataset received which corruption.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenerationLog {
    pub outlier_rows: Vec<usize>,
    pub label_noise_rows: Vec<usize>,
}

pub fn generate<T: Scalar>(config: &GeneratorConfig) -> Result<Dataset<T>> {
    generate_with_log(config).map(|(ds, _)| ds)
}

pub fn generate_with_log<T: Scalar>(config: &GeneratorConfig) -> Result<(Dataset<T>, GenerationLog)> {
    let stream = RollStream::new(config.clone())?;
    let n = config.n_instances;
    let mut rows: Vec<LabeledInstance<T>> = (0..n as u64)
        .map(|t| {
            let r = stream.roll::<T>(t);
            LabeledInstance {
                measurement: r.measured,
                label: r.class,
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(config.seed, Purpose::Shuffle, 0));
    let n_out = config.outlier_count();
    let n_lab = config.label_noise_count();
    let mut outlier_rows = order[..n_out].to_vec();
    let mut label_noise_rows = order[n_out..n_out + n_lab].to_vec();
    outlier_rows.sort_unstable();
    label_noise_rows.sort_unstable();

    for &i in &outlier_rows {
        let mut r = rng::stream(config.seed, Purpose::Outlier, i as u64);
        rows[i].measurement = GrossFault::draw(&mut r).apply(&rows[i].measurement);
    }
    let classes = stream.classes.clone();
    for &i in &label_noise_rows {
        let mut r = rng::stream(config.seed, Purpose::LabelNoise, i as u64);
        rows[i].label = adjacent_class(&classes, rows[i].label, &mut r);
    }
    Ok((
        Dataset::new(rows),
        GenerationLog {
            outlier_rows,
            label_noise_rows,
        },
    ))
}

/// Neighbour of `class` in the sorted class list; a fair coin picks the side
/// when both exist.
fn adjacent_class(classes: &[GrammageClass], class: GrammageClass, rng: &mut rng::Rng) -> GrammageClass {
    let pos = classes.iter().position(|&c| c == class).unwrap_or(0);
    match (pos.checked_sub(1), classes.get(pos + 1)) {
        (Some(lo), Some(&hi)) => {
            if rng.random_bool(0.5) {
                classes[lo]
            } else {
                hi
            }
        }
        (Some(lo), None) => classes[lo],
        (None, Some(&hi)) => hi,
        (None, None) => class,
    }
}
