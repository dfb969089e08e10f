//! Prompt templates with `{name}` placeholders.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::TeacherError;
use crate::conversation::Conversation;
use crate::intent::IntentDescriptor;

pub const LABEL_TURNS: &str = include_str!("../../templates/label_turns.txt");
pub const SEED_CONVERSATION: &str = include_str!("../../templates/seed_conversation.txt");
pub const PERSONAS: &str = include_str!("../../templates/personas.txt");
pub const PERSONA_CONVERSATION: &str = include_str!("../../templates/persona_conversation.txt");

pub const ANNOTATOR_SYSTEM: &str =
    "You are a careful annotator of multi-party conversations. You follow the requested output format exactly.";
pub const WRITER_SYSTEM: &str = "You write natural, varied conversations between people.";

/// The template set used by the teacher operations. Each template must use
/// its required placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub label_turns: String,
    pub seed_conversation: String,
    pub personas: String,
    pub persona_conversation: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            label_turns: LABEL_TURNS.into(),
            seed_conversation: SEED_CONVERSATION.into(),
            personas: PERSONAS.into(),
            persona_conversation: PERSONA_CONVERSATION.into(),
        }
    }
}

impl PromptTemplates {
    pub const LABEL_PLACEHOLDERS: &'static [&'static str] =
        &["intent_definition", "positive_examples", "negative_examples", "conversation", "n_turns"];
    pub const SEED_PLACEHOLDERS: &'static [&'static str] = &["seed"];
    pub const PERSONA_PLACEHOLDERS: &'static [&'static str] = &["n_speakers", "topic_hint"];
    pub const PERSONA_CONVERSATION_PLACEHOLDERS: &'static [&'static str] = &["personas", "starter"];

    pub fn validate(&self) -> Result<(), TeacherError> {
        let checks: [(&str, &str, &[&str]); 4] = [
            ("label_turns", &self.label_turns, Self::LABEL_PLACEHOLDERS),
            ("seed_conversation", &self.seed_conversation, Self::SEED_PLACEHOLDERS),
            ("personas", &self.personas, Self::PERSONA_PLACEHOLDERS),
            ("persona_conversation", &self.persona_conversation, Self::PERSONA_CONVERSATION_PLACEHOLDERS),
        ];
        for (name, template, required) in checks {
            for p in required {
                if !template.contains(&format!("{{{p}}}")) {
                    return Err(TeacherError::Template(format!("template {name} lacks placeholder {{{p}}}")));
                }
            }
        }
        Ok(())
    }
}

/// Replaces every `{key}` in `template`; unknown placeholders are left as
/// they are.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let replaced = after.find('}').and_then(|close| {
            let key = &after[..close];
            values.iter().find(|(k, _)| *k == key).map(|(_, v)| (close, *v))
        });
        match replaced {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Numbered turn listing, `[i] speaker: text`, one turn per line.
pub fn numbered_conversation(conv: &Conversation) -> String {
    let mut out = String::new();
    for (i, turn) in conv.turns.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let speaker = if turn.speaker.trim().is_empty() { "Speaker" } else { turn.speaker.trim() };
        out.push_str(&format!("[{i}] {speaker}: {}", one_line(&turn.text)));
    }
    out
}

/// Example block: each example followed by its explanation when one exists.
/// Explanations pair with positives first, then negatives.
pub fn example_block(intent: &IntentDescriptor, positive: bool) -> String {
    let (examples, offset) = if positive {
        (&intent.positive_examples, 0)
    } else {
        (&intent.negative_examples, intent.positive_examples.len())
    };
    if examples.is_empty() {
        return "(none)".into();
    }
    let mut out = String::new();
    for (i, ex) in examples.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("- \"{}\"", one_line(ex)));
        if let Some(why) = intent.example_explanations.get(offset + i) {
            out.push_str(&format!("\n  Why: {}", one_line(why)));
        }
    }
    out
}

pub fn label_prompt(templates: &PromptTemplates, intent: &IntentDescriptor, conv: &Conversation) -> String {
    let n_turns = format!("{}", conv.turns.len());
    fill(
        &templates.label_turns,
        &[
            ("intent_id", &intent.id),
            ("intent_definition", &intent.definition),
            ("positive_examples", &example_block(intent, true)),
            ("negative_examples", &example_block(intent, false)),
            ("conversation", &numbered_conversation(conv)),
            ("n_turns", &n_turns),
        ],
    )
}
