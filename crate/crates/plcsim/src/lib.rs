//! Simulated wrapping-station PLC.
//!
//! A small TCP tag server that feeds synthetic rolls into a fixed tag table,
//! plus the async client the predictor polls it with. See [`state`] for the
//! wire protocol.

pub mod client;
pub mod server;
pub mod state;
pub mod tags;

use thiserror::Error;

pub use client::{ClientError, TagClient, TagReading};
pub use server::{default_addr, now_ms, run_server, ServerConfig, ServerHandle, Tick, ADDR_ENV, DEFAULT_ADDR};
pub use state::{advance_roll, handle_command, ErrorCode, RollEvent, SimState, MAX_LINE};
pub use tags::{AddressError, Quality, TagAddress, TagEntry};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    Config(String),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
}
