use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("no labels to aggregate")]
    NoLabels,

    #[error("intent vector length {found} does not match schema length {expected}")]
    SchemaMismatch { expected: usize, found: usize },

    #[error("turn range [{start}, {end}) is invalid for a conversation of {len} turns")]
    InvalidRange { start: usize, end: usize, len: usize },

    #[error("conversation {conversation}: turn {turn} carries no labels")]
    UnlabeledTurn { conversation: String, turn: usize },

    #[error("conversation {0} carries no conversation-level labels")]
    UnlabeledConversation(String),

    #[error("invalid intent schema: {0}")]
    InvalidSchema(String),

    #[error("invalid conversation {id}: {reason}")]
    InvalidConversation { id: String, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0} predictions for {1} conversations")]
    PredictionCoverage(usize, usize),

    #[error("total token count is zero, reduction is undefined")]
    ZeroTokens,

    #[error("empty corpus: {0}")]
    EmptyCorpus(&'static str),

    #[error("scoring backend failed: {0}")]
    Backend(String),
}
