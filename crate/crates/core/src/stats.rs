use alloc::vec;
use alloc::vec::Vec;

use crate::conversation::Conversation;
use crate::tokens::{conversation_tokens, TokenCounter};
use crate::{Error, Result};

/// Per-dataset label distribution, mirroring a dataset summary table.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetStats {
    pub total: u64,
    pub per_intent_positive: Vec<u64>,
    pub per_intent_negative: Vec<u64>,
    pub total_tokens: u64,
}

impl DatasetStats {
    pub fn empty(intents: usize) -> Self {
        Self { total: 0, per_intent_positive: vec![0; intents], per_intent_negative: vec![0; intents], total_tokens: 0 }
    }

    pub fn add<C: TokenCounter + ?Sized>(&mut self, conv: &Conversation, counter: &C) -> Result<()> {
        let labels = conv.labels.as_ref().ok_or_else(|| Error::UnlabeledConversation(conv.id.clone()))?;
        labels.check_len(self.per_intent_positive.len())?;
        self.total += 1;
        for k in 0..labels.len() {
            if labels[k] {
                self.per_intent_positive[k] += 1;
            } else {
                self.per_intent_negative[k] += 1;
            }
        }
        self.total_tokens += conversation_tokens(conv, counter) as u64;
        Ok(())
    }
}

pub fn compute_stats<'a, C: TokenCounter + ?Sized>(
    convs: impl IntoIterator<Item = &'a Conversation>,
    intents: usize,
    counter: &C,
) -> Result<DatasetStats> {
    let mut stats = DatasetStats::empty(intents);
    for conv in convs {
        stats.add(conv, counter)?;
    }
    Ok(stats)
}
