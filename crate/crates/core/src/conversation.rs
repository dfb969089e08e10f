//! Conversations, turns, segments and the label algebra over them.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::intent::Labels;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    /// Speaker name as found in the source, possibly empty.
    pub speaker: String,
    pub text: String,
    pub labels: Option<Labels>,
}

impl Turn {
    pub fn new(speaker: impl Into<String>, text: impl Into<String>) -> Self {
        Self { speaker: speaker.into(), text: text.into(), labels: None }
    }

    pub fn labeled(speaker: impl Into<String>, text: impl Into<String>, labels: Labels) -> Self {
        Self { speaker: speaker.into(), text: text.into(), labels: Some(labels) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conversation {
    pub id: String,
    pub source_dataset: String,
    pub turns: Vec<Turn>,
    pub labels: Option<Labels>,
    /// Free-form metadata, e.g. the personas a synthetic conversation was
    /// generated from.
    pub notes: Option<String>,
}

/// Half-open range `[start, end)` of turn indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TurnRange {
    pub start: usize,
    pub end: usize,
}

impl TurnRange {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn check(&self, turn_count: usize) -> Result<()> {
        if self.start >= self.end || self.end > turn_count {
            return Err(Error::InvalidRange { start: self.start, end: self.end, len: turn_count });
        }
        Ok(())
    }
}

/// A contiguous turn range of a conversation together with its OR-aggregated
/// labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub conversation_id: String,
    pub range: TurnRange,
    pub labels: Labels,
}

impl Conversation {
    pub fn new(id: impl Into<String>, source_dataset: impl Into<String>, turns: Vec<Turn>) -> Self {
        Self { id: id.into(), source_dataset: source_dataset.into(), turns, labels: None, notes: None }
    }

    pub fn full_range(&self) -> TurnRange {
        TurnRange::new(0, self.turns.len())
    }

    pub fn turns_labeled(&self) -> bool {
        self.turns.iter().all(|t| t.labels.is_some())
    }

    /// OR of the turn labels in `range`.
    pub fn range_labels(&self, range: TurnRange) -> Result<Labels> {
        range.check(self.turns.len())?;
        let mut out: Option<Labels> = None;
        for (i, turn) in self.turns[range.start..range.end].iter().enumerate() {
            let labels = turn
                .labels
                .as_ref()
                .ok_or_else(|| Error::UnlabeledTurn { conversation: self.id.clone(), turn: range.start + i })?;
            match out.as_mut() {
                None => out = Some(labels.clone()),
                Some(acc) => acc.union_with(labels)?,
            }
        }
        // range.check guarantees at least one turn
        Ok(out.expect("non-empty range"))
    }

    /// Sets the conversation labels to the OR of all turn labels.
    pub fn derive_labels(&mut self) -> Result<&Labels> {
        let labels = self.range_labels(self.full_range())?;
        Ok(self.labels.insert(labels))
    }

    /// Checks the structural invariants against a schema of `intent_count`
    /// intents.
    pub fn validate(&self, intent_count: usize) -> Result<()> {
        let invalid = |reason: String| Error::InvalidConversation { id: self.id.clone(), reason };
        if self.turns.is_empty() {
            return Err(invalid("conversation has no turns".into()));
        }
        for (i, turn) in self.turns.iter().enumerate() {
            if turn.text.trim().is_empty() {
                return Err(invalid(format!("turn {i} has empty text")));
            }
            if let Some(labels) = &turn.labels {
                labels.check_len(intent_count)?;
            }
        }
        if let Some(labels) = &self.labels {
            labels.check_len(intent_count)?;
            if self.turns_labeled() {
                let derived = self.range_labels(self.full_range())?;
                if &derived != labels {
                    return Err(invalid("conversation labels differ from the OR of its turn labels".into()));
                }
            }
        }
        Ok(())
    }
}

/// Per-intent OR over a list of label vectors.
pub fn aggregate_labels<'a>(labels: impl IntoIterator<Item = &'a Labels>) -> Result<Labels> {
    let mut iter = labels.into_iter();
    let mut acc = iter.next().ok_or(Error::NoLabels)?.clone();
    for l in iter {
        acc.union_with(l)?;
    }
    Ok(acc)
}

/// Joins the texts of the turns in `range` with `" {separator} "`. Speaker
/// names are never part of the output.
pub fn render_model_input(conv: &Conversation, range: TurnRange, separator: &str) -> Result<String> {
    range.check(conv.turns.len())?;
    let mut out = String::new();
    for (i, turn) in conv.turns[range.start..range.end].iter().enumerate() {
        if i > 0 {
            out.push(' ');
            out.push_str(separator);
            out.push(' ');
        }
        out.push_str(&turn.text);
    }
    Ok(out)
}

/// Aggregated labels of a segment's turn range.
pub fn segment_labels(conv: &Conversation, seg: &Segment) -> Result<Labels> {
    conv.range_labels(seg.range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn l(a: u8, i: u8) -> Labels {
        Labels::from_bits(&[a, i]).unwrap()
    }

    fn labeled_conv(labels: &[(u8, u8)]) -> Conversation {
        let turns =
            labels.iter().enumerate().map(|(i, &(a, b))| Turn::labeled("s", format!("turn {i}"), l(a, b))).collect();
        Conversation::new("c1", "test", turns)
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate_labels(&[l(1, 0), l(0, 0)]).unwrap(), l(1, 0));
        assert_eq!(aggregate_labels(&[l(0, 0), l(0, 0)]).unwrap(), l(0, 0));
        assert_eq!(aggregate_labels(&[l(0, 1), l(1, 0), l(0, 0)]).unwrap(), l(1, 1));
    }

    #[test]
    fn aggregate_errors() {
        assert_eq!(aggregate_labels(&[]), Err(Error::NoLabels));
        let short = Labels::new(vec![true]);
        assert!(matches!(aggregate_labels(&[l(0, 0), short]), Err(Error::SchemaMismatch { expected: 2, found: 1 })));
    }

    #[test]
    fn render_examples() {
        let conv = Conversation::new("c", "d", vec![Turn::new("Ann", "hi"), Turn::new("Bo", "set a reminder")]);
        assert_eq!(render_model_input(&conv, conv.full_range(), "[SEP]").unwrap(), "hi [SEP] set a reminder");

        let single = Conversation::new("c", "d", vec![Turn::new("Ann", "hello")]);
        assert_eq!(render_model_input(&single, single.full_range(), "[SEP]").unwrap(), "hello");

        let abc = Conversation::new("c", "d", vec![Turn::new("x", "a"), Turn::new("y", "b"), Turn::new("z", "c")]);
        assert_eq!(render_model_input(&abc, abc.full_range(), "<s>").unwrap(), "a <s> b <s> c");
        assert!(matches!(render_model_input(&abc, TurnRange::new(2, 4), "<s>"), Err(Error::InvalidRange { .. })));
        assert!(render_model_input(&abc, TurnRange::new(1, 1), "<s>").is_err());
    }

    #[test]
    fn segment_label_examples() {
        let conv = labeled_conv(&[(1, 0), (0, 0), (0, 1)]);
        let seg = |s, e| Segment { conversation_id: "c1".into(), range: TurnRange::new(s, e), labels: l(0, 0) };
        assert_eq!(segment_labels(&conv, &seg(0, 2)).unwrap(), l(1, 0));
        assert_eq!(segment_labels(&conv, &seg(1, 2)).unwrap(), l(0, 0));
        assert_eq!(segment_labels(&conv, &seg(0, 3)).unwrap(), l(1, 1));
    }

    #[test]
    fn segment_labels_needs_turn_labels() {
        let mut conv = labeled_conv(&[(1, 0), (0, 0)]);
        conv.turns[1].labels = None;
        let seg = Segment { conversation_id: "c1".into(), range: TurnRange::new(0, 2), labels: l(0, 0) };
        assert_eq!(segment_labels(&conv, &seg), Err(Error::UnlabeledTurn { conversation: "c1".into(), turn: 1 }));
    }

    #[test]
    fn validate_checks_or_invariant() {
        let mut conv = labeled_conv(&[(1, 0), (0, 0)]);
        conv.labels = Some(l(1, 1));
        assert!(conv.validate(2).is_err());
        conv.derive_labels().unwrap();
        assert_eq!(conv.labels, Some(l(1, 0)));
        assert!(conv.validate(2).is_ok());
        assert!(conv.validate(3).is_err());

        conv.turns[0].text = "   ".into();
        assert!(conv.validate(2).is_err());
        assert!(Conversation::new("e", "d", Vec::new()).validate(2).is_err());
    }
}
