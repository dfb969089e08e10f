//! Intent-schema files and the run configuration.
//!
//! Both are TOML. A schema file lists `[[intent]]` tables in output order; the
//! run configuration has one section per stage:
//!
//! ```toml
//! schema = "schema.toml"      # optional, default two-intent schema otherwise
//! counter = "whitespace"
//!
//! [train]
//! batch_size = 24
//! [train.window]
//! min_turns = 1
//! [segmentation]
//! context_budget = 512
//! [teacher]
//! endpoint = "https://..."
//! [gateway]
//! model = "model.cgbl"
//! [desk]
//! seeds_per_intent = 1000
//! ```

use std::path::{Path, PathBuf};

use convo_gate_core::filter::SegmentationConfig;
use convo_gate_core::synth::DeskCorpusConfig;
use convo_gate_core::train::TrainConfig;
use convo_gate_core::{IntentDescriptor, IntentSchema};
use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::gateway::GatewayConfig;
use crate::teacher_http::TeacherConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CounterKind {
    #[default]
    Whitespace,
    /// The tokenizer of a loaded external model bundle.
    External,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaFile {
    intent: Vec<IntentDescriptor>,
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<IntentSchema> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(GateError::io(path))?;
    let file: SchemaFile =
        toml::from_str(&text).map_err(|e| GateError::Config { path: path.to_path_buf(), reason: e.to_string() })?;
    Ok(IntentSchema::new(file.intent)?)
}

pub fn schema_to_toml(schema: &IntentSchema) -> String {
    toml::to_string_pretty(&SchemaFile { intent: schema.intents().to_vec() }).expect("schema serializes")
}

/// Loads `path` if given, the default schema otherwise.
pub fn schema_or_default(path: Option<&Path>) -> Result<IntentSchema> {
    path.map_or_else(|| Ok(IntentSchema::default_schema()), load_schema)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema: Option<PathBuf>,
    pub counter: CounterKind,
    pub train: TrainConfig,
    pub segmentation: SegmentationConfig,
    pub teacher: TeacherConfig,
    pub gateway: GatewayConfig,
    pub desk: DeskCorpusConfig,
}

impl RunConfig {
    /// Parses a run configuration. Relative paths inside it are taken
    /// relative to the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(GateError::io(path))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| GateError::Config { path: path.to_path_buf(), reason: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.schema.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.gateway.model.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.gateway.audit_log.as_mut() {
            rebase(p);
        }
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn schema(&self) -> Result<IntentSchema> {
        schema_or_default(self.schema.as_deref())
    }
}
