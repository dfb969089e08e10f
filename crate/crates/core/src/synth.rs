//! Synthetic corpus assembly: slot-filled seed queries, seed-driven and
//! persona-driven generation, teacher labeling and splitting.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::conversation::Conversation;
use crate::intent::IntentSchema;
use crate::rng::SplitMix64;
use crate::teacher::{
    apply_annotations, generate_from_seeds, generate_persona_conversation, label_turns_with, PersonaOptions,
    PromptTemplates, Teacher, TeacherError,
};

const ACTION_FORMS: &[&str] = &[
    "remind me to {chore} {when}",
    "can you schedule {event} {when}",
    "please {chore} {when}",
    "i will {chore} {when}",
    "add {item} to the todo list",
    "can you order {item} for the flat",
    "i promise to {chore} {when}",
    "put {event} on the shared calendar, please remember it",
];

const INFO_FORMS: &[&str] = &[
    "what is the best way to {chore}",
    "how much does {item} cost these days",
    "why was {event} moved",
    "where can i find {item}",
    "is {event} still happening {when}?",
    "tell me about {event}",
    "what did they decide about {event}",
    "how long does it take to {chore}",
];

const CHORES: &[&str] = &[
    "call the plumber",
    "renew my passport",
    "water the plants",
    "pay the electricity bill",
    "return the library books",
    "book the dentist",
    "back up the laptop",
    "buy a birthday gift for dad",
];

const EVENTS: &[&str] = &[
    "the team lunch",
    "the parents evening",
    "the yoga class",
    "the quarterly review",
    "the flat viewing",
    "the football practice",
];

const ITEMS: &[&str] = &["oat milk", "printer ink", "a new kettle", "bin bags", "coffee beans", "a phone charger"];

const WHENS: &[&str] = &["tomorrow", "tonight", "on friday", "at 6pm", "next week", "this weekend", "after lunch"];

fn fill_form(rng: &mut SplitMix64, form: &str) -> String {
    let mut pick = |pool: &[&str]| pool[rng.below(pool.len() as u64) as usize].to_string();
    let chore = pick(CHORES);
    let event = pick(EVENTS);
    let item = pick(ITEMS);
    let when = pick(WHENS);
    form.replace("{chore}", &chore).replace("{event}", &event).replace("{item}", &item).replace("{when}", &when)
}

/// `n` slot-filled seed queries for the intent at `intent` in the default
/// schema (0 = action requests, otherwise questions).
pub fn seed_queries(intent: usize, n: usize, rng: &mut SplitMix64) -> Vec<String> {
    let forms = if intent == 0 { ACTION_FORMS } else { INFO_FORMS };
    (0..n)
        .map(|_| {
            let form = forms[rng.below(forms.len() as u64) as usize];
            fill_form(rng, form)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DeskCorpusConfig {
    /// Seed-driven conversations per schema intent.
    pub seeds_per_intent: usize,
    pub persona_conversations: usize,
    pub min_speakers: usize,
    pub max_speakers: usize,
    pub min_turns: usize,
    pub seed: u64,
}

impl Default for DeskCorpusConfig {
    fn default() -> Self {
        Self {
            seeds_per_intent: 1000,
            persona_conversations: 1000,
            min_speakers: 2,
            max_speakers: 4,
            min_turns: 6,
            seed: 0,
        }
    }
}

fn label_into<T: Teacher + ?Sized>(
    conv: &mut Conversation,
    schema: &IntentSchema,
    teacher: &T,
    templates: &PromptTemplates,
) -> Result<(), TeacherError> {
    let ann = label_turns_with(conv, schema, teacher, templates)?;
    apply_annotations(conv, &ann).map_err(|e| TeacherError::Precondition(e.to_string()))
}

/// Builds a labeled corpus: seed-driven conversations for every intent plus
/// persona conversations, all labeled turn by turn by `teacher`.
pub fn build_desk_corpus<T: Teacher + ?Sized>(
    teacher: &T,
    schema: &IntentSchema,
    cfg: &DeskCorpusConfig,
    templates: &PromptTemplates,
) -> Result<Vec<Conversation>, TeacherError> {
    if cfg.min_speakers < 2 || cfg.max_speakers < cfg.min_speakers {
        return Err(TeacherError::Precondition(format!(
            "speaker range {}..={} is invalid",
            cfg.min_speakers, cfg.max_speakers
        )));
    }
    let mut rng = SplitMix64::new(cfg.seed);
    let mut out = Vec::new();
    for (k, intent) in schema.intents().iter().enumerate() {
        let seeds = seed_queries(k, cfg.seeds_per_intent, &mut rng);
        for conv in generate_from_seeds(&seeds, intent, teacher, templates) {
            let mut conv = conv?;
            label_into(&mut conv, schema, teacher, templates)?;
            out.push(conv);
        }
    }
    for _ in 0..cfg.persona_conversations {
        let opts = PersonaOptions {
            n_speakers: rng.range_inclusive(cfg.min_speakers, cfg.max_speakers),
            topic_hint: None,
            min_turns: cfg.min_turns,
            seed: rng.next_u64(),
        };
        let mut conv = generate_persona_conversation(&opts, teacher, templates)?;
        label_into(&mut conv, schema, teacher, templates)?;
        out.push(conv);
    }
    Ok(out)
}

/// Shuffles and cuts into (train, validation, test) with the given sizes of
/// the last two.
pub fn split_corpus(
    mut convs: Vec<Conversation>,
    n_val: usize,
    n_test: usize,
    seed: u64,
) -> crate::Result<(Vec<Conversation>, Vec<Conversation>, Vec<Conversation>)> {
    if n_val + n_test >= convs.len() {
        return Err(crate::Error::InvalidConfig(format!(
            "cannot hold out {} of {} conversations",
            n_val + n_test,
            convs.len()
        )));
    }
    SplitMix64::new(seed).shuffle(&mut convs);
    let test = convs.split_off(convs.len() - n_test);
    let val = convs.split_off(convs.len() - n_val);
    Ok((convs, val, test))
}
