//! Core algorithms for intent-based filtering of multi-party conversations.
//!
//! This crate is `no_std` and only needs an allocator. It holds the pieces that
//! are pure computation:
//!
//! - conversation and intent-label types, OR aggregation of turn labels and
//!   rendering of model input ([`conversation`], [`intent`]);
//! - rolling-window augmentation and context-budget segmentation
//!   ([`augment`]) driven by a portable PRNG ([`rng`]);
//! - the hashed n-gram logistic baseline, its trainer and the checkpoint
//!   selection loop ([`features`], [`baseline`], [`train`]);
//! - per-intent metrics and token-reduction accounting ([`metrics`],
//!   [`reduction`], [`stats`]);
//! - teacher prompt assembly, response parsing and the deterministic mock
//!   teacher ([`teacher`], [`synth`]).
//!
//! File formats, HTTP clients, the gateway service and the CLI live in the
//! `convo-gate` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod augment;
pub mod baseline;
pub mod conversation;
mod error;
pub mod features;
pub mod filter;
pub mod intent;
pub mod metrics;
pub mod reduction;
pub mod rng;
pub mod sampling;
pub mod stats;
pub mod synth;
pub mod teacher;
pub mod tokens;
pub mod train;

pub use conversation::{aggregate_labels, render_model_input, segment_labels, Conversation, Segment, Turn, TurnRange};
pub use error::Error;
pub use intent::{IntentDescriptor, IntentSchema, Labels, Scores};

/// Default separator placed between turn texts in model input.
pub const DEFAULT_SEPARATOR: &str = "[SEP]";

pub type Result<T, E = Error> = core::result::Result<T, E>;
