//! Dataset manifests and corpus ingestion.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use convo_gate_core::{Conversation, IntentSchema};
use serde::{Deserialize, Serialize};

use crate::corpus::{read_corpus, write_corpus, MalformedPolicy};
use crate::error::{GateError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Validation,
    Test,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Validation => "validation",
            Role::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub path: PathBuf,
    pub role: Role,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    #[serde(default, rename = "dataset")]
    pub datasets: Vec<DatasetEntry>,
}

impl CorpusManifest {
    /// Loads a manifest; relative dataset paths are resolved against the
    /// manifest's directory and must exist.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(GateError::io(path))?;
        let config_err = |reason: String| GateError::Config { path: path.to_path_buf(), reason };
        let mut manifest: CorpusManifest = toml::from_str(&text).map_err(|e| config_err(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut names = BTreeSet::new();
        for d in &mut manifest.datasets {
            if !names.insert(d.name.clone()) {
                return Err(config_err(format!("dataset name {:?} appears twice", d.name)));
            }
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
            if !d.path.exists() {
                return Err(config_err(format!("dataset {:?}: {} does not exist", d.name, d.path.display())));
            }
        }
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = toml::to_string_pretty(self)
            .map_err(|e| GateError::Config { path: path.to_path_buf(), reason: e.to_string() })?;
        std::fs::write(path, text).map_err(GateError::io(path))
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &DatasetEntry> {
        self.datasets.iter().filter(move |d| d.role == role)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub name: String,
    pub role: Role,
    pub conversations: usize,
    pub dropped_turns: usize,
    pub dropped_conversations: usize,
}

/// Drops turns whose text is empty after trimming. Returns the number dropped.
pub fn drop_empty_turns(conv: &mut Conversation) -> usize {
    let before = conv.turns.len();
    conv.turns.retain(|t| !t.text.trim().is_empty());
    before - conv.turns.len()
}

/// Normalizes every dataset of the manifest into `out/<role>/<name>.jsonl`
/// and writes `out/manifest.toml` pointing at the new files.
pub fn ingest(
    manifest_path: impl AsRef<Path>,
    out: impl AsRef<Path>,
    schema: &IntentSchema,
) -> Result<Vec<IngestSummary>> {
    let manifest = CorpusManifest::load(manifest_path)?;
    let out = out.as_ref();
    let mut summaries = Vec::new();
    let mut written = CorpusManifest::default();
    for d in &manifest.datasets {
        let mut summary = IngestSummary {
            name: d.name.clone(),
            role: d.role,
            conversations: 0,
            dropped_turns: 0,
            dropped_conversations: 0,
        };
        let mut convs = Vec::new();
        for conv in read_corpus(&d.path, schema, MalformedPolicy::Abort)?.unchecked() {
            let mut conv = conv?;
            summary.dropped_turns += drop_empty_turns(&mut conv);
            if conv.turns.is_empty() {
                summary.dropped_conversations += 1;
                continue;
            }
            conv.validate(schema.len())?;
            convs.push(conv);
        }
        if summary.dropped_turns > 0 {
            log::info!("{}: dropped {} empty turns", d.name, summary.dropped_turns);
        }
        let relative = PathBuf::from(d.role.as_str()).join(format!("{}.jsonl", d.name));
        summary.conversations = write_corpus(&convs, out.join(&relative), schema)?;
        written.datasets.push(DatasetEntry {
            name: d.name.clone(),
            path: relative,
            role: d.role,
            notes: d.notes.clone(),
        });
        summaries.push(summary);
    }
    std::fs::create_dir_all(out).map_err(GateError::io(out))?;
    written.save(out.join("manifest.toml"))?;
    Ok(summaries)
}
