//! Live grammage prediction.
//!
//! Polls the wrapping-station tags, classifies each new roll with a saved
//! model, keeps an append-only record log with operator labels and serves
//! the records and running statistics over HTTP.

pub mod api;
pub mod poll;
pub mod record;
pub mod service;
pub mod store;

use grammage_core::GrammageClass;
use grammage_plcsim::ClientError;
use thiserror::Error;

pub use poll::{build_record, poll_cycle, read_roll, record_manual, Cursor, RollSnapshot};
pub use record::{RollRecord, SessionStats};
pub use service::{serve, ServeHandle, Service, ServiceConfig, DEFAULT_POLL_MS};
pub use store::Store;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("unknown roll {0}")]
    UnknownRoll(u64),
    #[error("roll {0} is already labeled")]
    AlreadyLabeled(u64),
    #[error("roll {0} is already stored")]
    DuplicateRoll(u64),
    #[error("grammage {0} is not one of the standard classes")]
    NonstandardLabel(GrammageClass),
    #[error("record store: {0}")]
    Store(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Model(#[from] grammage_core::Error),
    #[error("{0}")]
    Config(String),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
}
