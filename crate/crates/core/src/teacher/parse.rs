//! Parsing of teacher responses.
//!
//! Responses may wrap the structured block in arbitrary prose; only the last
//! `<tag> ... </tag>` block is read.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Persona, TeacherError};

/// One turn's label for a single intent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnJudgement {
    pub turn_index: usize,
    pub label: bool,
    pub explanation: String,
}

fn block<'a>(raw: &'a str, tag: &str) -> Result<&'a str, TeacherError> {
    let open = alloc::format!("<{tag}>");
    let close = alloc::format!("</{tag}>");
    let start = raw.rfind(&open).ok_or_else(|| TeacherError::parse(alloc::format!("missing {open} block"), raw))?;
    let body = &raw[start + open.len()..];
    let end = body.find(&close).ok_or_else(|| TeacherError::parse(alloc::format!("missing {close}"), raw))?;
    Ok(&body[..end])
}

fn strip_bullet(line: &str) -> &str {
    line.trim().trim_start_matches(['-', '*']).trim()
}

/// Parses a labeling response for one intent. Every turn `0..expected_turns`
/// must appear exactly once with a 0/1 label, and every positive label needs
/// an explanation.
pub fn parse_teacher_response(raw: &str, expected_turns: usize) -> Result<Vec<TurnJudgement>, TeacherError> {
    let body = block(raw, "labels")?;
    let mut out: Vec<TurnJudgement> = Vec::new();
    for line in body.lines().map(strip_bullet).filter(|l| !l.is_empty()) {
        let mut parts = line.splitn(3, '|').map(str::trim);
        let (Some(turn), Some(label)) = (parts.next(), parts.next()) else {
            return Err(TeacherError::parse(alloc::format!("malformed label line {line:?}"), raw));
        };
        let explanation = parts.next().unwrap_or("").to_string();
        let digits = turn.trim_start_matches(['T', 't']).trim_start_matches('#').trim();
        let turn_index: usize =
            digits.parse().map_err(|_| TeacherError::parse(alloc::format!("bad turn index {turn:?}"), raw))?;
        let label = match label {
            "0" => false,
            "1" => true,
            other => return Err(TeacherError::LabelDomain { turn: turn_index, value: other.to_string() }),
        };
        if turn_index >= expected_turns {
            return Err(TeacherError::Coverage { expected: expected_turns, found: turn_index + 1 });
        }
        if out.iter().any(|j| j.turn_index == turn_index) {
            return Err(TeacherError::DuplicateTurn(turn_index));
        }
        if label && explanation.is_empty() {
            return Err(TeacherError::MissingExplanation(turn_index));
        }
        out.push(TurnJudgement { turn_index, label, explanation });
    }
    if out.len() != expected_turns {
        return Err(TeacherError::Coverage { expected: expected_turns, found: out.len() });
    }
    out.sort_by_key(|j| j.turn_index);
    Ok(out)
}

/// Parses `Name: utterance` lines from a `<conversation>` block.
pub fn parse_generated_turns(raw: &str) -> Result<Vec<(String, String)>, TeacherError> {
    let body = block(raw, "conversation")?;
    let mut turns = Vec::new();
    for line in body.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let Some((speaker, text)) = line.split_once(':') else {
            return Err(TeacherError::parse(alloc::format!("turn line without speaker: {line:?}"), raw));
        };
        let (speaker, text) = (speaker.trim(), text.trim());
        if speaker.is_empty() || text.is_empty() {
            return Err(TeacherError::parse(alloc::format!("empty speaker or text in {line:?}"), raw));
        }
        turns.push((speaker.to_string(), text.to_string()));
    }
    if turns.is_empty() {
        return Err(TeacherError::parse("generated conversation has no turns".into(), raw));
    }
    Ok(turns)
}

/// Parses the persona block and the conversation starter.
pub fn parse_personas(raw: &str) -> Result<(Vec<Persona>, String), TeacherError> {
    let body = block(raw, "personas")?;
    let mut personas: Vec<Persona> = Vec::new();
    for line in body.lines().map(strip_bullet).filter(|l| !l.is_empty()) {
        let fields: Vec<&str> = line.splitn(3, '|').map(str::trim).collect();
        if fields.len() != 3 || fields[0].is_empty() {
            return Err(TeacherError::parse(alloc::format!("malformed persona line {line:?}"), raw));
        }
        if personas.iter().any(|p| p.name == fields[0]) {
            return Err(TeacherError::parse(alloc::format!("duplicate persona {:?}", fields[0]), raw));
        }
        personas.push(Persona { name: fields[0].into(), qualities: fields[1].into(), speech_style: fields[2].into() });
    }
    let starter = block(raw, "starter")?.trim();
    if starter.is_empty() {
        return Err(TeacherError::parse("empty conversation starter".into(), raw));
    }
    Ok((personas, starter.into()))
}
