//! Classifier models: the built-in baseline (`CGBL1` file) or an external
//! bundle directory, behind one scoring interface.

pub mod baseline_file;
#[cfg(feature = "onnx")]
pub mod external;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use convo_gate_core::filter::IntentScorer;
use convo_gate_core::intent::Thresholds;
use convo_gate_core::tokens::{TokenCounter, WhitespaceCounter};
use convo_gate_core::{IntentSchema, Scores};
use serde::{Deserialize, Serialize};

use crate::config::CounterKind;
use crate::error::{GateError, Result};
pub use baseline_file::BaselineArtifact;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub trained_on: String,
    pub steps: u64,
}

#[derive(Debug)]
pub enum Backend {
    Baseline(BaselineArtifact),
    #[cfg(feature = "onnx")]
    External(Box<external::ExternalModel>),
}

#[derive(Debug)]
pub struct ClassifierModel {
    backend: Backend,
    source: PathBuf,
    ids: Vec<String>,
    thresholds: Thresholds,
    metadata: ModelMetadata,
    separator: String,
}

impl ClassifierModel {
    pub fn from_baseline(artifact: BaselineArtifact, source: impl Into<PathBuf>) -> Self {
        Self {
            ids: artifact.intent_ids.clone(),
            thresholds: artifact.thresholds.clone(),
            metadata: artifact.metadata.clone(),
            separator: artifact.model.separator.clone(),
            backend: Backend::Baseline(artifact),
            source: source.into(),
        }
    }

    /// Loads a `CGBL1` file, or an external bundle when `path` is a directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if path.is_dir() {
            return Self::load_external(path);
        }
        let bytes = std::fs::read(path).map_err(GateError::io(path))?;
        let artifact =
            BaselineArtifact::from_bytes(&bytes).map_err(|reason| GateError::Model { path: path.into(), reason })?;
        Ok(Self::from_baseline(artifact, path))
    }

    #[cfg(feature = "onnx")]
    pub fn load_external(path: impl AsRef<Path>) -> Result<Self> {
        let model = external::ExternalModel::load(path.as_ref())?;
        let meta = &model.metadata;
        let thresholds = Thresholds::new(meta.thresholds.clone())
            .map_err(|e| GateError::Model { path: path.as_ref().into(), reason: e.to_string() })?;
        Ok(Self {
            ids: meta.intents.clone(),
            thresholds,
            metadata: ModelMetadata { trained_on: meta.trained_on.clone(), steps: meta.steps },
            separator: meta.separator.clone(),
            source: path.as_ref().into(),
            backend: Backend::External(Box::new(model)),
        })
    }

    #[cfg(not(feature = "onnx"))]
    pub fn load_external(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(GateError::Io {
                path: path.into(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "model bundle directory not found"),
            });
        }
        Err(GateError::Model { path: path.into(), reason: "built without the `onnx` feature".into() })
    }

    /// Loads `path` and checks it against the run schema.
    pub fn load_for(path: impl AsRef<Path>, schema: &IntentSchema) -> Result<Self> {
        let model = Self::load(path)?;
        model.check_schema(schema)?;
        Ok(model)
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn kind(&self) -> &'static str {
        match self.backend {
            Backend::Baseline(_) => "baseline",
            #[cfg(feature = "onnx")]
            Backend::External(_) => "external",
        }
    }

    pub fn source(&self) -> &Path {
        &self.source
    }

    pub fn intent_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    pub fn separator(&self) -> &str {
        &self.separator
    }

    /// Intent ids must match the schema in number and order.
    pub fn check_schema(&self, schema: &IntentSchema) -> Result<()> {
        schema.check_order(self.ids.iter().map(String::as_str))?;
        Ok(())
    }

    pub fn predict(&self, text: &str) -> Result<Scores> {
        match &self.backend {
            Backend::Baseline(a) => Ok(a.model.predict(text)),
            #[cfg(feature = "onnx")]
            Backend::External(m) => m.score_text(text),
        }
    }
}

impl IntentScorer for ClassifierModel {
    fn intent_count(&self) -> usize {
        self.ids.len()
    }

    fn score(&self, text: &str) -> convo_gate_core::Result<Scores> {
        self.predict(text).map_err(|e| convo_gate_core::Error::Backend(e.to_string()))
    }
}

/// Token counter selected by [`CounterKind`].
#[derive(Debug, Clone)]
pub enum Counter {
    Whitespace,
    /// Counts with the tokenizer of an external model.
    External(Arc<ClassifierModel>),
}

impl Counter {
    pub fn new(kind: CounterKind, model: Option<&Arc<ClassifierModel>>) -> Result<Self> {
        match kind {
            CounterKind::Whitespace => Ok(Self::Whitespace),
            CounterKind::External => match model {
                #[cfg(feature = "onnx")]
                Some(m) if matches!(m.backend, Backend::External(_)) => Ok(Self::External(Arc::clone(m))),
                _ => Err(GateError::Usage("the external token counter needs a loaded external model bundle".into())),
            },
        }
    }
}

impl TokenCounter for Counter {
    fn count(&self, text: &str) -> usize {
        match self {
            Counter::Whitespace => WhitespaceCounter.count(text),
            Counter::External(model) => match &model.backend {
                #[cfg(feature = "onnx")]
                Backend::External(m) => m.count_tokens(text).unwrap_or_else(|e| {
                    log::warn!("{e}");
                    WhitespaceCounter.count(text)
                }),
                Backend::Baseline(_) => WhitespaceCounter.count(text),
            },
        }
    }
}
