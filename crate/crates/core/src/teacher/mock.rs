//! Deterministic offline teacher.
//!
//! Labels follow a fixed keyword rule over the lowercased turn text, so a
//! corpus labeled by the mock has a known ground truth. Generation draws from
//! small phrase pools with a PRNG keyed on the prompt and the request seed.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use super::{ChatRequest, Persona, Teacher, TeacherError, TeacherTask};
use crate::intent::{ACTION_TRIGGERING, INFORMATION_SEEKING};
use crate::rng::{fnv1a64, SplitMix64};

pub const ACTION_KEYWORDS: &[&str] =
    &["remind", "schedule", "please ", "can you", "task", "promise", "i will ", "todo"];
pub const INFO_KEYWORDS: &[&str] = &["?", "what", "why", "how", "who ", "when ", "where ", "tell me"];

/// The keyword that makes `text` positive for `intent`, if any. Intents
/// outside the default schema are never positive.
pub fn mock_keyword(intent: &str, text: &str) -> Option<&'static str> {
    let lower = text.to_lowercase();
    let keywords = match intent {
        ACTION_TRIGGERING => ACTION_KEYWORDS,
        INFORMATION_SEEKING => INFO_KEYWORDS,
        _ => return None,
    };
    keywords.iter().copied().find(|k| lower.contains(k))
}

const NAMES: &[&str] = &[
    "Ana", "Ben", "Chloe", "Dev", "Emre", "Farah", "Gus", "Hana", "Ivo", "Jun", "Kemi", "Lars", "Mira", "Nico", "Omar",
    "Pia", "Quinn", "Rosa", "Sami", "Tess",
];

const QUALITIES: &[&str] = &[
    "easygoing and chatty",
    "precise, a little impatient",
    "warm and encouraging",
    "dry sense of humour",
    "always running late",
    "detail oriented planner",
];

const STYLES: &[&str] =
    &["short bursts", "long rambling sentences", "lots of slang", "formal and polite", "emoji heavy"];

const OPENERS: &[&str] = &["hey there", "morning all", "ok so, quick thing", "hi, got a minute", "yo"];

const ACKS: &[&str] = &["sure thing", "sounds good to me", "ok, noted", "right, makes sense", "got it, thanks", "cool"];

/// Neutral chatter, negative for both intents.
pub const NEUTRAL_LINES: &[&str] = &[
    "sounds good to me",
    "haha fair enough",
    "i had pasta for lunch",
    "the train was packed again today",
    "love that song",
    "ok cool",
    "nice, congrats on the new flat",
    "it rained all morning here",
    "that movie was great",
    "i am so tired lately",
    "the dog finally learned to sit",
    "same here",
    "lol yes",
    "my sister visits next week",
    "the match last night was wild",
    "i think the blue one looks better",
];

/// Questions, positive for information-seeking only.
pub const QUESTION_LINES: &[&str] = &[
    "what time does the shop close",
    "why is the wifi so slow today",
    "how far is the station from here",
    "does anyone know a good dentist?",
    "tell me more about the trip",
    "where is the spare key kept",
    "who is bringing the cake on friday",
    "is the meeting still on?",
];

/// Commitments and requests, positive for action-triggering only.
pub const COMMITMENT_LINES: &[&str] = &[
    "i will send the slides tonight",
    "please book a table for four",
    "remind me to water the plants",
    "let's schedule a call for monday",
    "i promise to fix the bike this weekend",
    "add milk to the todo list",
    "that task is mine, i will handle it",
    "please pick up the parcel at noon",
];

const STARTERS: &[&str] = &[
    "anyone around this afternoon",
    "big news from the office today",
    "the weather finally turned",
    "just got back from the market",
    "you will never guess the news",
];

#[derive(Debug, Clone, Copy, Default)]
pub struct MockTeacher;

impl MockTeacher {
    fn rng(request: &ChatRequest) -> SplitMix64 {
        SplitMix64::new(request.seed.unwrap_or(0) ^ fnv1a64(request.prompt().as_bytes()))
    }

    fn pick<'a>(rng: &mut SplitMix64, pool: &[&'a str]) -> &'a str {
        pool[rng.below(pool.len() as u64) as usize]
    }

    fn labels(intent: &str, turns: &[String]) -> String {
        let mut out = String::from("Here are my labels.\n<labels>\n");
        for (i, text) in turns.iter().enumerate() {
            match mock_keyword(intent, text) {
                Some(k) => writeln!(out, "T{i} | 1 | contains {k:?}"),
                None => writeln!(out, "T{i} | 0 | no cue for {intent}"),
            }
            .expect("write to String");
        }
        out.push_str("</labels>");
        out
    }

    fn seed_conversation(rng: &mut SplitMix64, seed: &str) -> String {
        let a = Self::pick(rng, NAMES);
        let mut b = Self::pick(rng, NAMES);
        while b == a {
            b = Self::pick(rng, NAMES);
        }
        let lines =
            [(a, Self::pick(rng, OPENERS)), (b, seed), (a, Self::pick(rng, ACKS)), (b, Self::pick(rng, NEUTRAL_LINES))];
        let mut out = String::from("<conversation>\n");
        for (speaker, text) in lines {
            out.push_str(&format!("{speaker}: {}\n", text.replace('\n', " ")));
        }
        out.push_str("</conversation>");
        out
    }

    fn personas(rng: &mut SplitMix64, n: usize, hint: Option<&str>) -> String {
        let names: Vec<&str> =
            rng.permutation(NAMES.len()).into_iter().take(n.min(NAMES.len())).map(|i| NAMES[i]).collect();
        let mut out = String::from("<personas>\n");
        for name in names {
            let q = Self::pick(rng, QUALITIES);
            let s = Self::pick(rng, STYLES);
            out.push_str(&format!("{name} | {q} | {s}\n"));
        }
        out.push_str("</personas>\n<starter>");
        match hint {
            Some(h) => out.push_str(&format!("so, about {}", h.replace('\n', " "))),
            None => out.push_str(Self::pick(rng, STARTERS)),
        }
        out.push_str("</starter>");
        out
    }

    fn persona_conversation(rng: &mut SplitMix64, personas: &[Persona], starter: &str, min_turns: usize) -> String {
        let n_turns = min_turns.max(personas.len()) + rng.below(4) as usize;
        // some conversations are pure small talk
        let small_talk = rng.below(5) < 2;
        let mut out = String::from("<conversation>\n");
        for i in 0..n_turns {
            let speaker = &personas[i % personas.len()].name;
            let text = if i == 0 {
                starter
            } else {
                match if small_talk { 0 } else { rng.below(10) } {
                    0..=5 => Self::pick(rng, NEUTRAL_LINES),
                    6 | 7 => Self::pick(rng, QUESTION_LINES),
                    _ => Self::pick(rng, COMMITMENT_LINES),
                }
            };
            out.push_str(&format!("{speaker}: {text}\n"));
        }
        out.push_str("</conversation>");
        out
    }
}

impl Teacher for MockTeacher {
    fn complete(&self, request: &ChatRequest) -> Result<String, TeacherError> {
        let mut rng = Self::rng(request);
        Ok(match &request.task {
            TeacherTask::LabelTurns { intent, turns } => Self::labels(intent, turns),
            TeacherTask::SeedConversation { seed, .. } => Self::seed_conversation(&mut rng, seed),
            TeacherTask::Personas { n_speakers, topic_hint } => {
                Self::personas(&mut rng, *n_speakers, topic_hint.as_deref())
            }
            TeacherTask::PersonaConversation { personas, starter, min_turns } => {
                if personas.is_empty() {
                    return Err(TeacherError::Precondition("no personas".into()));
                }
                Self::persona_conversation(&mut rng, personas, starter, *min_turns)
            }
        })
    }
}
