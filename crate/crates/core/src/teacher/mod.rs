//! LLM teacher: turn-level intent annotation and synthetic conversation
//! generation.
//!
//! The [`Teacher`] trait is a single chat-completion call. Operations here
//! build the prompts, call the teacher and parse the replies, so they work the
//! same against a remote provider and against [`MockTeacher`].

mod mock;
mod parse;
pub mod prompts;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::conversation::{Conversation, Turn};
use crate::intent::{IntentDescriptor, IntentSchema, Labels, ACTION_TRIGGERING, INFORMATION_SEEKING};
use crate::rng::fnv1a64;

pub use mock::{
    mock_keyword, MockTeacher, ACTION_KEYWORDS, COMMITMENT_LINES, INFO_KEYWORDS, NEUTRAL_LINES, QUESTION_LINES,
};
pub use parse::{parse_generated_turns, parse_personas, parse_teacher_response, TurnJudgement};
pub use prompts::PromptTemplates;

pub const LABEL_TEMPERATURE: f64 = 0.0;
pub const GENERATION_TEMPERATURE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TeacherError {
    #[error("teacher transport failed: {0}")]
    Transport(String),

    #[error("could not parse teacher response ({reason})")]
    Parse { reason: String, raw: String },

    #[error("response covers {found} turns, expected {expected}")]
    Coverage { expected: usize, found: usize },

    #[error("turn {turn}: label {value:?} is not 0 or 1")]
    LabelDomain { turn: usize, value: String },

    #[error("turn {0} is labeled more than once")]
    DuplicateTurn(usize),

    #[error("turn {0} is labeled positive without an explanation")]
    MissingExplanation(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("prompt template error: {0}")]
    Template(String),
}

impl TeacherError {
    pub fn parse(reason: String, raw: &str) -> Self {
        Self::Parse { reason, raw: raw.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Persona {
    pub name: String,
    pub qualities: String,
    pub speech_style: String,
}

/// What a request asks for. Remote providers only see the messages; the mock
/// teacher answers from this structured description.
#[derive(Debug, Clone, PartialEq)]
pub enum TeacherTask {
    LabelTurns { intent: String, turns: Vec<String> },
    SeedConversation { seed: String, intent: String },
    Personas { n_speakers: usize, topic_hint: Option<String> },
    PersonaConversation { personas: Vec<Persona>, starter: String, min_turns: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub seed: Option<u64>,
    pub task: TeacherTask,
}

impl ChatRequest {
    pub fn prompt(&self) -> &str {
        self.messages.iter().rev().find(|m| m.role == Role::User).map_or("", |m| m.content.as_str())
    }
}

pub trait Teacher {
    fn complete(&self, request: &ChatRequest) -> Result<String, TeacherError>;
}

impl<T: Teacher + ?Sized> Teacher for &T {
    fn complete(&self, request: &ChatRequest) -> Result<String, TeacherError> {
        (**self).complete(request)
    }
}

/// Labels and explanations of one turn across all schema intents.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnAnnotation {
    pub turn_index: usize,
    pub labels: Labels,
    /// One entry per intent; empty only for negative labels without a reason.
    pub explanations: Vec<String>,
}

pub fn label_turns<T: Teacher + ?Sized>(
    conv: &Conversation,
    schema: &IntentSchema,
    teacher: &T,
) -> Result<Vec<TurnAnnotation>, TeacherError> {
    label_turns_with(conv, schema, teacher, &PromptTemplates::default())
}

/// Runs one labeling request per intent and merges the per-intent answers
/// into one annotation per turn.
pub fn label_turns_with<T: Teacher + ?Sized>(
    conv: &Conversation,
    schema: &IntentSchema,
    teacher: &T,
    templates: &PromptTemplates,
) -> Result<Vec<TurnAnnotation>, TeacherError> {
    if conv.turns.is_empty() {
        return Err(TeacherError::Precondition(format!("conversation {} has no turns", conv.id)));
    }
    let n = conv.turns.len();
    let mut out: Vec<TurnAnnotation> = (0..n)
        .map(|i| TurnAnnotation {
            turn_index: i,
            labels: Labels::negative(schema.len()),
            explanations: vec![String::new(); schema.len()],
        })
        .collect();
    for (k, intent) in schema.intents().iter().enumerate() {
        let request = ChatRequest {
            messages: vec![
                ChatMessage::system(prompts::ANNOTATOR_SYSTEM),
                ChatMessage::user(prompts::label_prompt(templates, intent, conv)),
            ],
            temperature: LABEL_TEMPERATURE,
            seed: None,
            task: TeacherTask::LabelTurns {
                intent: intent.id.clone(),
                turns: conv.turns.iter().map(|t| t.text.clone()).collect(),
            },
        };
        let raw = teacher.complete(&request)?;
        for judgement in parse_teacher_response(&raw, n)? {
            let ann = &mut out[judgement.turn_index];
            ann.labels.set(k, judgement.label);
            ann.explanations[k] = judgement.explanation;
        }
    }
    Ok(out)
}

/// Writes annotations into the turns and derives the conversation labels.
pub fn apply_annotations(conv: &mut Conversation, annotations: &[TurnAnnotation]) -> Result<(), crate::Error> {
    if annotations.len() != conv.turns.len() {
        return Err(crate::Error::InvalidConversation {
            id: conv.id.clone(),
            reason: format!("{} annotations for {} turns", annotations.len(), conv.turns.len()),
        });
    }
    for ann in annotations {
        conv.turns[ann.turn_index].labels = Some(ann.labels.clone());
    }
    conv.derive_labels()?;
    Ok(())
}

/// Dataset name given to conversations generated for `intent`.
pub fn seed_dataset_name(intent: &str) -> String {
    match intent {
        ACTION_TRIGGERING => "synthetic-multi-turn-assistant".into(),
        INFORMATION_SEEKING => "synthetic-information-seeking".into(),
        other => format!("synthetic-{other}"),
    }
}

pub const PERSONA_DATASET: &str = "synthetic-situations";

fn turns_from(pairs: Vec<(String, String)>) -> Vec<Turn> {
    pairs.into_iter().map(|(s, t)| Turn::new(s, t)).collect()
}

/// One unlabeled multi-party conversation per seed query, each built around
/// the seed's request or question.
pub fn generate_from_seeds<'a, T: Teacher + ?Sized>(
    seeds: &'a [String],
    intent: &'a IntentDescriptor,
    teacher: &'a T,
    templates: &'a PromptTemplates,
) -> impl Iterator<Item = Result<Conversation, TeacherError>> + 'a {
    let dataset = seed_dataset_name(&intent.id);
    seeds.iter().enumerate().map(move |(i, seed)| {
        if seed.trim().is_empty() {
            return Err(TeacherError::Precondition(format!("seed {i} is empty")));
        }
        let prompt = prompts::fill(
            &templates.seed_conversation,
            &[("seed", seed.trim()), ("intent_definition", &intent.definition), ("n_turns", "4")],
        );
        let request = ChatRequest {
            messages: vec![ChatMessage::system(prompts::WRITER_SYSTEM), ChatMessage::user(prompt)],
            temperature: GENERATION_TEMPERATURE,
            seed: None,
            task: TeacherTask::SeedConversation { seed: seed.trim().into(), intent: intent.id.clone() },
        };
        let raw = teacher.complete(&request)?;
        let turns = turns_from(parse_generated_turns(&raw)?);
        let id = format!("{dataset}-{i:05}-{:08x}", fnv1a64(seed.as_bytes()) as u32);
        Ok(Conversation::new(id, dataset.clone(), turns))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonaOptions {
    pub n_speakers: usize,
    pub topic_hint: Option<String>,
    pub min_turns: usize,
    /// Passed to the provider as the sampling seed.
    pub seed: u64,
}

impl Default for PersonaOptions {
    fn default() -> Self {
        Self { n_speakers: 3, topic_hint: None, min_turns: 6, seed: 0 }
    }
}

pub fn persona_prompt(templates: &PromptTemplates, opts: &PersonaOptions) -> String {
    let n = opts.n_speakers.to_string();
    let hint = opts.topic_hint.as_deref().unwrap_or("anything from daily life");
    prompts::fill(&templates.personas, &[("n_speakers", &n), ("topic_hint", hint)])
}

fn persona_notes(personas: &[Persona], starter: &str) -> String {
    let mut notes = String::from("personas: ");
    for (i, p) in personas.iter().enumerate() {
        if i > 0 {
            notes.push_str("; ");
        }
        notes.push_str(&format!("{} ({}; {})", p.name, p.qualities, p.speech_style));
    }
    notes.push_str(&format!("\nstarter: {starter}"));
    notes
}

/// Two-phase generation: first personas and a starter line, then the
/// conversation among those personas opening with the starter. The persona
/// descriptions end up in the conversation notes.
pub fn generate_persona_conversation<T: Teacher + ?Sized>(
    opts: &PersonaOptions,
    teacher: &T,
    templates: &PromptTemplates,
) -> Result<Conversation, TeacherError> {
    if opts.n_speakers < 2 {
        return Err(TeacherError::Precondition(format!(
            "a multi-party conversation needs at least 2 speakers, got {}",
            opts.n_speakers
        )));
    }
    let phase1 = ChatRequest {
        messages: vec![ChatMessage::system(prompts::WRITER_SYSTEM), ChatMessage::user(persona_prompt(templates, opts))],
        temperature: GENERATION_TEMPERATURE,
        seed: Some(opts.seed),
        task: TeacherTask::Personas { n_speakers: opts.n_speakers, topic_hint: opts.topic_hint.clone() },
    };
    let raw = teacher.complete(&phase1)?;
    let (personas, starter) = parse_personas(&raw)?;
    if personas.len() < 2 {
        return Err(TeacherError::parse(format!("only {} personas generated", personas.len()), &raw));
    }

    let listing = personas
        .iter()
        .map(|p| format!("- {}: {}. Speech style: {}", p.name, p.qualities, p.speech_style))
        .collect::<Vec<_>>()
        .join("\n");
    let min_turns = opts.min_turns.max(2).to_string();
    let prompt = prompts::fill(
        &templates.persona_conversation,
        &[("personas", &listing), ("starter", &starter), ("min_turns", &min_turns)],
    );
    let phase2 = ChatRequest {
        messages: vec![ChatMessage::system(prompts::WRITER_SYSTEM), ChatMessage::user(prompt)],
        temperature: GENERATION_TEMPERATURE,
        seed: Some(opts.seed),
        task: TeacherTask::PersonaConversation {
            personas: personas.clone(),
            starter: starter.clone(),
            min_turns: opts.min_turns.max(2),
        },
    };
    let raw = teacher.complete(&phase2)?;
    let turns = turns_from(parse_generated_turns(&raw)?);
    let mut key = Vec::new();
    for t in &turns {
        key.extend_from_slice(t.text.as_bytes());
    }
    let id = format!("{PERSONA_DATASET}-{:016x}-{:08x}", opts.seed, fnv1a64(&key) as u32);
    let mut conv = Conversation::new(id, PERSONA_DATASET, turns);
    conv.notes = Some(persona_notes(&personas, &starter));
    Ok(conv)
}
