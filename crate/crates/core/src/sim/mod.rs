//! Deterministic discrete-event simulation of a transponder in the field.
//!
//! A simulated station emits frames on its own schedule, a lossy channel
//! drops or corrupts them, the [`transponder::Transponder`] state machine
//! receives, repacks and transmits, and a server endpoint verifies and
//! decodes the uplinks. Everything is driven by seeded ChaCha streams, so a
//! run is a pure function of its configuration.

use thiserror::Error;

pub mod channel;
pub mod config;
pub mod emitter;
mod run;
pub mod trace;
pub mod transponder;

pub use channel::channel_apply;
pub use config::{SimConfig, ValidConfig};
pub use run::run;
pub use trace::{Event, EventKind, Invariants, SimTrace, Summary};
pub use transponder::{Action, Input, State, Transponder};

pub(crate) const STREAM_EMITTER: u64 = 1;
pub(crate) const STREAM_CHANNEL: u64 = 2;
pub(crate) const STREAM_BAROMETER: u64 = 3;
pub(crate) const STREAM_GATEWAY: u64 = 4;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error(transparent)]
    Decode(#[from] crate::rfdecode::DecodeError),
    #[error(transparent)]
    Record(#[from] crate::record::RecordError),
    #[error(transparent)]
    Payload(#[from] crate::lorawan::PayloadError),
    #[error(transparent)]
    Frame(#[from] crate::lorawan::FrameError),
    #[error(transparent)]
    Radio(#[from] crate::lorawan::RadioError),
    #[error(transparent)]
    Energy(#[from] crate::energy::EnergyError),
}
