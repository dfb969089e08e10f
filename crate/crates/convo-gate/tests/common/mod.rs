#![allow(dead_code)]

use convo_gate::model::{BaselineArtifact, ClassifierModel, ModelMetadata};
use convo_gate_core::baseline::BaselineModel;
use convo_gate_core::features::FeatureHasher;
use convo_gate_core::intent::Thresholds;
use convo_gate_core::rng::SplitMix64;
use convo_gate_core::teacher::{COMMITMENT_LINES, NEUTRAL_LINES, QUESTION_LINES};
use convo_gate_core::{Conversation, IntentSchema, Turn, DEFAULT_SEPARATOR};

/// Hand-weighted baseline: "remind", "please" and "schedule" push the first
/// intent, "?" and "what" the second.
pub fn keyword_artifact() -> BaselineArtifact {
    let hasher = FeatureHasher::new(7, 1 << 12);
    let mut model = BaselineModel::zeros(2, hasher, DEFAULT_SEPARATOR);
    model.bias = vec![-3.0, -3.0];
    for w in ["remind", "please", "schedule"] {
        model.weights[0][hasher.bucket(w)] += 6.0;
    }
    for w in ["?", "what"] {
        model.weights[1][hasher.bucket(w)] += 6.0;
    }
    BaselineArtifact {
        model,
        intent_ids: IntentSchema::default_schema().ids().map(String::from).collect(),
        thresholds: Thresholds::default_for(2),
        metadata: ModelMetadata { trained_on: "hand".into(), steps: 0 },
    }
}

pub fn keyword_model() -> ClassifierModel {
    ClassifierModel::from_baseline(keyword_artifact(), "hand.cgbl")
}

/// Unlabeled multi-party snippet built from the mock teacher's line pools.
pub fn snippet(id: &str, rng: &mut SplitMix64) -> Conversation {
    let speakers = ["ana", "ben", "chidi", "dana"];
    let n = 1 + rng.below(8) as usize;
    let turns = (0..n)
        .map(|_| {
            let pool = match rng.below(5) {
                0 => QUESTION_LINES,
                1 => COMMITMENT_LINES,
                _ => NEUTRAL_LINES,
            };
            let text = pool[rng.below(pool.len() as u64) as usize];
            Turn::new(speakers[rng.below(4) as usize], text)
        })
        .collect();
    Conversation::new(id, "live", turns)
}
