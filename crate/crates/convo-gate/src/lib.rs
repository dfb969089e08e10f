//! Standard-library side of convo-gate: corpus files and manifests, run
//! configuration, model files, the HTTP teacher, evaluation reports and the
//! filtering gateway. The algorithms live in [`convo_gate_core`].

pub mod config;
pub mod corpus;
pub mod error;
pub mod gateway;
pub mod manifest;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod teacher_http;

pub use convo_gate_core as core;
pub use error::{GateError, Result};
