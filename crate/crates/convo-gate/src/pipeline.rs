//! Multi-step flows shared by the CLI and the tests.

use convo_gate_core::filter::SegmentationConfig;
use convo_gate_core::intent::Thresholds;
use convo_gate_core::train::{train_baseline, TrainConfig, TrainingLog};
use convo_gate_core::{Conversation, IntentSchema};

use crate::error::Result;
use crate::model::{BaselineArtifact, ModelMetadata};

/// Trains the baseline and packages the selected checkpoint with the
/// schema's intent ids and the given thresholds.
pub fn train_artifact<C: convo_gate_core::tokens::TokenCounter + ?Sized>(
    train: &[Conversation],
    val: &[Conversation],
    schema: &IntentSchema,
    cfg: &TrainConfig,
    seg: &SegmentationConfig,
    counter: &C,
    trained_on: &str,
) -> Result<(BaselineArtifact, TrainingLog)> {
    let outcome = train_baseline(train, val, schema.len(), cfg, seg, counter)?;
    let artifact = BaselineArtifact {
        model: outcome.model,
        intent_ids: schema.ids().map(String::from).collect(),
        thresholds: Thresholds::default_for(schema.len()),
        metadata: ModelMetadata { trained_on: trained_on.into(), steps: outcome.log.best_step },
    };
    Ok((artifact, outcome.log))
}
