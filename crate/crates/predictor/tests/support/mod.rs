#![allow(dead_code)]

use std::sync::OnceLock;

use grammage_core::eval::stratified_split;
use grammage_core::learners::{BoostParams, LearnerSpec};
use grammage_core::outliers::filter_outliers;
use grammage_core::synthgen::generate;
use grammage_core::{Dataset, GeneratorConfig, Measurement, Model};
use grammage_plcsim::{run_server, ServerConfig, ServerHandle, SimState, Tick};

/// Default pipeline model: generate, filter, split, boost.
pub fn model() -> Model {
    static MODEL: OnceLock<Model> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            let seed = 1;
            let cfg = GeneratorConfig {
                seed,
                ..GeneratorConfig::default()
            };
            let raw: Dataset = generate(&cfg).unwrap();
            let (ds, _) = filter_outliers(&raw, 0.2).unwrap().inliers.without_nonstandard();
            let (train, _) = stratified_split(&ds, 0.7, seed).unwrap();
            LearnerSpec::Adaboost(BoostParams::default()).fit(&train, seed).unwrap()
        })
        .clone()
}

pub fn paper_roll() -> Measurement {
    Measurement::from_features([1000.0, 820.0, 564.0])
}

pub async fn sim(fault_rate: f64, tick: Tick) -> ServerHandle {
    let state = SimState::new(GeneratorConfig::default(), fault_rate, 0).unwrap();
    run_server(
        ServerConfig {
            listen: "127.0.0.1:0".into(),
            tick,
        },
        state,
    )
    .await
    .unwrap()
}
