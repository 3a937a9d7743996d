//! Paper-roll grammage classification from diameter, width and weight.
//!
//! The pipeline: generate labeled rolls ([`synthgen`]), drop sensor faults
//! with an elliptic envelope ([`outliers`]), split and train ([`eval`],
//! [`learners`]), then persist the model ([`persist`]) for the live
//! predictor.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`.

pub mod domain;
pub mod error;
pub mod eval;
pub mod learners;
pub mod outliers;
pub mod persist;
pub mod rng;
pub mod scalar;
pub mod synthgen;

pub use domain::{class_counts, parse_dataset, write_dataset, GrammageClass, CANONICAL_CLASSES};
pub use error::{Error, Result};
pub use learners::{Classifier, LearnerSpec};
pub use scalar::Scalar;
pub use synthgen::GeneratorConfig;

pub type Measurement = domain::RollMeasurement<f64>;
pub type Instance = domain::LabeledInstance<f64>;
pub type Dataset = domain::Dataset<f64>;
pub type Model = learners::TrainedModel<f64>;
pub type SavedModel = persist::SavedModel<f64>;
pub type BoostModel = learners::BoostModel<f64>;
pub type TreeModel = learners::TreeModel<f64>;
pub type ForestModel = learners::ForestModel<f64>;
pub type OutlierSplit = outliers::OutlierSplit<f64>;
