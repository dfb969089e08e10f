//! Externally trained models: an ONNX graph plus a tokenizer.
//!
//! Bundle directory layout:
//!
//! - `model.onnx`: inputs `input_ids` and `attention_mask` (int64,
//!   `[1, max_length]`), output `logits` (`[1, n_intents]`);
//! - `tokenizer.json`: a tokenizers definition file;
//! - `metadata.json`: intent ids in output order, default thresholds,
//!   `max_length`, and optionally `pad_id`, `separator`, `trained_on`, `steps`.
//!
//! Inputs are tokenized with special tokens, cut to `max_length` and
//! right-padded.

use std::path::{Path, PathBuf};

use convo_gate_core::baseline::sigmoid;
use convo_gate_core::{Scores, DEFAULT_SEPARATOR};
use serde::{Deserialize, Serialize};
use tokenizers::Tokenizer;
use tract_onnx::prelude::*;

use crate::error::{GateError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleMetadata {
    pub intents: Vec<String>,
    pub thresholds: Vec<f64>,
    pub max_length: usize,
    #[serde(default)]
    pub pad_id: u32,
    #[serde(default = "default_separator")]
    pub separator: String,
    #[serde(default)]
    pub trained_on: String,
    #[serde(default)]
    pub steps: u64,
}

fn default_separator() -> String {
    DEFAULT_SEPARATOR.into()
}

pub struct ExternalModel {
    dir: PathBuf,
    plan: Arc<TypedRunnableModel>,
    tokenizer: Tokenizer,
    pub metadata: BundleMetadata,
}

impl std::fmt::Debug for ExternalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalModel").field("dir", &self.dir).field("metadata", &self.metadata).finish()
    }
}

impl ExternalModel {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let err = |reason: String| GateError::Model { path: dir.clone(), reason };
        if !dir.is_dir() {
            return Err(GateError::Io {
                path: dir.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "model bundle directory not found"),
            });
        }
        let meta_path = dir.join("metadata.json");
        let meta_text = std::fs::read_to_string(&meta_path).map_err(GateError::io(&meta_path))?;
        let metadata: BundleMetadata =
            serde_json::from_str(&meta_text).map_err(|e| err(format!("metadata.json: {e}")))?;
        if metadata.intents.is_empty() || metadata.intents.len() != metadata.thresholds.len() {
            return Err(err("metadata.json needs one threshold per intent".into()));
        }
        if metadata.max_length < 2 {
            return Err(err("max_length must be at least 2".into()));
        }

        let tokenizer =
            Tokenizer::from_file(dir.join("tokenizer.json")).map_err(|e| err(format!("tokenizer.json: {e}")))?;

        let graph_path = dir.join("model.onnx");
        if !graph_path.exists() {
            return Err(err("model.onnx is missing".into()));
        }
        let plan = Self::plan(&graph_path, metadata.max_length).map_err(|e| err(format!("model.onnx: {e:#}")))?;
        let model = Self { dir, plan, tokenizer, metadata };
        // a dry run catches output shapes that do not match the intent list
        model.score_text("")?;
        Ok(model)
    }

    fn plan(path: &Path, max_length: usize) -> TractResult<Arc<TypedRunnableModel>> {
        let mut model = tract_onnx::onnx().model_for_path(path)?;
        let input_names: Vec<String> = model.input_outlets()?.iter().map(|o| model.node(o.node).name.clone()).collect();
        for (slot, name) in ["input_ids", "attention_mask"].iter().enumerate() {
            let idx = input_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| TractError::msg(format!("graph has no input named {name} (inputs: {input_names:?})")))?;
            if idx != slot {
                return Err(TractError::msg(format!("input {name} is at position {idx}, expected {slot}")));
            }
            model.set_input_fact(idx, i64::fact([1, max_length]).into())?;
        }
        model.select_outputs_by_name(["logits"])?;
        model.into_optimized()?.into_runnable()
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Token ids and attention mask as fed to the graph.
    pub fn encode(&self, text: &str) -> Result<(Vec<i64>, Vec<i64>)> {
        let enc = self
            .tokenizer
            .encode(text, true)
            .map_err(|e| GateError::Model { path: self.dir.clone(), reason: format!("tokenizer: {e}") })?;
        let len = self.metadata.max_length;
        let mut ids: Vec<i64> = enc.get_ids().iter().take(len).map(|&i| i as i64).collect();
        let mut mask = vec![1i64; ids.len()];
        ids.resize(len, self.metadata.pad_id as i64);
        mask.resize(len, 0);
        Ok((ids, mask))
    }

    pub fn score_text(&self, text: &str) -> Result<Scores> {
        let err = |reason: String| GateError::Model { path: self.dir.clone(), reason };
        let (ids, mask) = self.encode(text)?;
        let shape = [1, self.metadata.max_length];
        let ids = Tensor::from_shape(&shape, &ids).map_err(|e| err(e.to_string()))?;
        let mask = Tensor::from_shape(&shape, &mask).map_err(|e| err(e.to_string()))?;
        let outputs = self.plan.run(tvec!(ids.into(), mask.into())).map_err(|e| err(format!("inference: {e:#}")))?;
        let logits = outputs[0].cast_to::<f32>().map_err(|e| err(e.to_string()))?;
        let values: Vec<f32> =
            logits.to_plain_array_view::<f32>().map_err(|e| err(e.to_string()))?.iter().copied().collect();
        if values.len() != self.metadata.intents.len() {
            return Err(err(format!(
                "graph produced {} logits for {} intents",
                values.len(),
                self.metadata.intents.len()
            )));
        }
        Ok(Scores::new(values.iter().map(|&z| sigmoid(z as f64)).collect()))
    }

    /// Number of tokenizer tokens in `text`, without special tokens.
    pub fn count_tokens(&self, text: &str) -> Result<usize> {
        self.tokenizer
            .encode(text, false)
            .map(|e| e.get_ids().len())
            .map_err(|e| GateError::Model { path: self.dir.clone(), reason: format!("tokenizer: {e}") })
    }
}
