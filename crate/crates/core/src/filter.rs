//! Snippet classification shared by offline evaluation and the gateway.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::augment::split_to_context_budget;
use crate::conversation::{render_model_input, Conversation};
use crate::intent::{decide, IntentSchema, Labels, Scores, Thresholds, ANY};
use crate::tokens::{truncate_to_budget, TokenCounter};
use crate::{Error, Result, DEFAULT_SEPARATOR};

/// A multi-label scorer: one score in `[0, 1]` per intent.
pub trait IntentScorer {
    fn intent_count(&self) -> usize;
    fn score(&self, text: &str) -> Result<Scores>;
}

impl<T: IntentScorer + ?Sized> IntentScorer for &T {
    fn intent_count(&self) -> usize {
        (**self).intent_count()
    }

    fn score(&self, text: &str) -> Result<Scores> {
        (**self).score(text)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SegmentationConfig {
    pub separator: String,
    pub context_budget: usize,
    /// Cut over-budget single turns down to the budget before scoring.
    pub truncate_over_budget: bool,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self { separator: DEFAULT_SEPARATOR.into(), context_budget: 512, truncate_over_budget: true }
    }
}

/// Which conversations are forwarded: those positive for one intent, or for
/// any intent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Predicate {
    Intent(usize),
    Any,
}

impl Predicate {
    pub fn parse(name: &str, schema: &IntentSchema) -> Result<Self> {
        if name == ANY {
            return Ok(Self::Any);
        }
        schema
            .index_of(name)
            .map(Self::Intent)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown predicate {name:?}")))
    }

    pub fn parse_list(list: &str, schema: &IntentSchema) -> Result<Vec<Self>> {
        list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|p| Self::parse(p, schema)).collect()
    }

    pub fn name(&self, schema: &IntentSchema) -> String {
        match self {
            Self::Intent(k) => schema.intents()[*k].id.clone(),
            Self::Any => ANY.to_string(),
        }
    }

    pub fn matches(&self, labels: &Labels) -> bool {
        match self {
            Self::Intent(k) => labels[*k],
            Self::Any => labels.any(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnippetClassification {
    /// Per-intent maximum over the budget chunks.
    pub scores: Scores,
    pub labels: Labels,
    pub chunks: usize,
}

/// Splits `conv` to the context budget, scores every chunk and combines them:
/// scores by per-intent maximum, so a snippet is positive for an intent iff at
/// least one chunk is.
pub fn classify_conversation<S, C>(
    scorer: &S,
    conv: &Conversation,
    seg: &SegmentationConfig,
    counter: &C,
    thresholds: &Thresholds,
) -> Result<SnippetClassification>
where
    S: IntentScorer + ?Sized,
    C: TokenCounter + ?Sized,
{
    if conv.turns.is_empty() {
        return Err(Error::InvalidConversation { id: conv.id.clone(), reason: "no turns".into() });
    }
    let chunks = split_to_context_budget(conv, seg.context_budget, counter, &seg.separator)?;
    let mut best: Option<Scores> = None;
    for chunk in &chunks {
        let mut text = render_model_input(conv, chunk.range, &seg.separator)?;
        if chunk.over_budget && seg.truncate_over_budget {
            text = truncate_to_budget(&text, seg.context_budget, counter);
        }
        let scores = scorer.score(&text)?;
        scores.check_len(scorer.intent_count())?;
        match best.as_mut() {
            None => best = Some(scores),
            Some(acc) => acc.max_with(&scores)?,
        }
    }
    let scores = best.expect("at least one chunk");
    let labels = decide(&scores, thresholds)?;
    Ok(SnippetClassification { scores, labels, chunks: chunks.len() })
}
