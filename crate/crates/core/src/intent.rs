//! Intent schema and per-intent vectors.
//!
//! The schema fixes the intent order; every [`Labels`] and [`Scores`] value is
//! indexed in that order.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Index;

use crate::{Error, Result};

pub const ACTION_TRIGGERING: &str = "action-triggering";
pub const INFORMATION_SEEKING: &str = "information-seeking";

/// Reserved for the "any intent" predicate, so it cannot name an intent.
pub const ANY: &str = "any";

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntentDescriptor {
    pub id: String,
    pub definition: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub positive_examples: Vec<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub negative_examples: Vec<String>,
    /// One explanation per example, positives first then negatives.
    #[cfg_attr(feature = "serde", serde(default))]
    pub example_explanations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntentSchema {
    intents: Vec<IntentDescriptor>,
}

fn is_kebab(id: &str) -> bool {
    !id.is_empty()
        && id
            .split('-')
            .all(|part| !part.is_empty() && part.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit()))
}

impl IntentSchema {
    pub fn new(intents: Vec<IntentDescriptor>) -> Result<Self> {
        if intents.is_empty() {
            return Err(Error::InvalidSchema("at least one intent is required".into()));
        }
        let mut seen = BTreeSet::new();
        for intent in &intents {
            if !is_kebab(&intent.id) {
                return Err(Error::InvalidSchema(format!("intent id {:?} is not lowercase-kebab", intent.id)));
            }
            if intent.id == ANY {
                return Err(Error::InvalidSchema("\"any\" is reserved for the any-intent predicate".into()));
            }
            if !seen.insert(intent.id.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate intent id {:?}", intent.id)));
            }
        }
        Ok(Self { intents })
    }

    /// The two-intent schema used throughout: action-triggering and
    /// information-seeking.
    pub fn default_schema() -> Self {
        let action = IntentDescriptor {
            id: ACTION_TRIGGERING.to_owned(),
            definition: "A participant wants something to get done, either by asking another person (or an \
                         assistant) to do it or by taking it on themselves for later."
                .to_owned(),
            positive_examples: vec![
                "A: can you book the meeting room for friday? B: sure, I will do it after lunch.".to_owned(),
                "A: remind me to send the slides tonight.".to_owned(),
            ],
            negative_examples: vec![
                "A: the weather was lovely yesterday. B: yes, we walked along the river.".to_owned(),
                "A: I read that book last year, it was fine.".to_owned(),
            ],
            example_explanations: vec![
                "B commits to booking the room, which is a task with an owner.".to_owned(),
                "A explicitly requests a reminder.".to_owned(),
                "Small talk about the past, nothing needs to be done.".to_owned(),
                "A past experience is described, no request or commitment.".to_owned(),
            ],
        };
        let info = IntentDescriptor {
            id: INFORMATION_SEEKING.to_owned(),
            definition: "A participant is trying to obtain information they are missing, whether phrased as a \
                         direct question or as an admitted gap they would like filled."
                .to_owned(),
            positive_examples: vec![
                "A: who wrote that article on glaciers? B: no idea, let me look it up.".to_owned(),
                "A: I never understood how tides actually work.".to_owned(),
            ],
            negative_examples: vec![
                "A: I will pick up the groceries. B: great, thanks.".to_owned(),
                "A: the train leaves at six.".to_owned(),
            ],
            example_explanations: vec![
                "A directly asks for a fact.".to_owned(),
                "A states a gap in knowledge and implicitly wants an explanation.".to_owned(),
                "A commitment, but nobody is asking for information.".to_owned(),
                "A statement of fact, no question or curiosity.".to_owned(),
            ],
        };
        Self { intents: vec![action, info] }
    }

    pub fn len(&self) -> usize {
        self.intents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intents.is_empty()
    }

    pub fn intents(&self) -> &[IntentDescriptor] {
        &self.intents
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.intents.iter().map(|i| i.id.as_str())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.intents.iter().position(|i| i.id == id)
    }

    pub fn get(&self, id: &str) -> Option<&IntentDescriptor> {
        self.intents.iter().find(|i| i.id == id)
    }

    /// Checks that `ids` lists exactly this schema's intents in the same order.
    pub fn check_order<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let found: Vec<&str> = ids.into_iter().collect();
        if found.len() != self.len() || !found.iter().zip(self.ids()).all(|(a, b)| *a == b) {
            return Err(Error::InvalidSchema(format!(
                "intent order {:?} does not match schema {:?}",
                found,
                self.ids().collect::<Vec<_>>()
            )));
        }
        Ok(())
    }
}

/// Binary per-intent labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Labels(Vec<bool>);

impl Labels {
    pub fn new(values: Vec<bool>) -> Self {
        Self(values)
    }

    pub fn negative(len: usize) -> Self {
        Self(vec![false; len])
    }

    /// Builds labels from 0/1 integers; any other value is rejected.
    pub fn from_bits(bits: &[u8]) -> Option<Self> {
        bits.iter()
            .map(|b| match b {
                0 => Some(false),
                1 => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.0.iter().map(|&b| b as u8).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn set(&mut self, intent: usize, value: bool) {
        self.0[intent] = value;
    }

    pub fn any(&self) -> bool {
        self.0.iter().any(|&b| b)
    }

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.0.len() != expected {
            return Err(Error::SchemaMismatch { expected, found: self.0.len() });
        }
        Ok(())
    }

    /// In-place OR with `other`.
    pub fn union_with(&mut self, other: &Labels) -> Result<()> {
        other.check_len(self.len())?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= *b;
        }
        Ok(())
    }
}

impl Index<usize> for Labels {
    type Output = bool;

    fn index(&self, index: usize) -> &bool {
        &self.0[index]
    }
}

/// Per-intent scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scores(Vec<f64>);

impl Scores {
    /// Scores are clamped into `[0, 1]`; NaN becomes 0.
    pub fn new(values: Vec<f64>) -> Self {
        Self(values.into_iter().map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.0.len() != expected {
            return Err(Error::SchemaMismatch { expected, found: self.0.len() });
        }
        Ok(())
    }

    /// Element-wise maximum.
    pub fn max_with(&mut self, other: &Scores) -> Result<()> {
        other.check_len(self.len())?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            if *b > *a {
                *a = *b;
            }
        }
        Ok(())
    }
}

impl Index<usize> for Scores {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

/// Per-intent decision thresholds, each in `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Thresholds(Vec<f64>);

impl Thresholds {
    pub const DEFAULT: f64 = 0.5;

    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::InvalidConfig(format!("threshold {bad} is outside (0, 1)")));
        }
        Ok(Self(values))
    }

    pub fn uniform(len: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn default_for(len: usize) -> Self {
        Self(vec![Self::DEFAULT; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn set(&mut self, intent: usize, value: f64) -> Result<()> {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::InvalidConfig(format!("threshold {value} is outside (0, 1)")));
        }
        self.0[intent] = value;
        Ok(())
    }
}

/// Thresholds the scores: an intent is positive iff its score is at least its
/// threshold.
pub fn decide(scores: &Scores, thresholds: &Thresholds) -> Result<Labels> {
    scores.check_len(thresholds.len())?;
    Ok(Labels(scores.0.iter().zip(&thresholds.0).map(|(s, t)| s >= t).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn descriptor(id: &str) -> IntentDescriptor {
        IntentDescriptor {
            id: id.into(),
            definition: "d".into(),
            positive_examples: Vec::new(),
            negative_examples: Vec::new(),
            example_explanations: Vec::new(),
        }
    }

    #[test]
    fn schema_rejects_bad_ids() {
        assert!(IntentSchema::new(Vec::new()).is_err());
        assert!(IntentSchema::new(vec![descriptor("Action")]).is_err());
        assert!(IntentSchema::new(vec![descriptor("a--b")]).is_err());
        assert!(IntentSchema::new(vec![descriptor("any")]).is_err());
        assert!(IntentSchema::new(vec![descriptor("a"), descriptor("a")]).is_err());
        assert!(IntentSchema::new(vec![descriptor("needs-action-2")]).is_ok());
    }

    #[test]
    fn default_schema_order() {
        let schema = IntentSchema::default_schema();
        assert_eq!(schema.ids().collect::<Vec<_>>(), [ACTION_TRIGGERING, INFORMATION_SEEKING]);
        assert!(IntentSchema::new(schema.intents().to_vec()).is_ok());
        assert!(schema.check_order([INFORMATION_SEEKING, ACTION_TRIGGERING]).is_err());
    }

    #[test]
    fn decide_examples() {
        let half = Thresholds::default_for(2);
        let d = decide(&Scores::new(vec![0.7, 0.2]), &half).unwrap();
        assert_eq!(d, Labels::new(vec![true, false]));

        let d = decide(&Scores::new(vec![0.5, 0.5]), &half).unwrap();
        assert_eq!(d, Labels::new(vec![true, true]));

        let skewed = Thresholds::new(vec![0.9, 0.1]).unwrap();
        let d = decide(&Scores::new(vec![0.7, 0.2]), &skewed).unwrap();
        assert_eq!(d, Labels::new(vec![false, true]));

        assert!(decide(&Scores::new(vec![0.1]), &half).is_err());
    }

    #[test]
    fn thresholds_must_be_open_interval() {
        assert!(Thresholds::new(vec![0.0]).is_err());
        assert!(Thresholds::new(vec![1.0]).is_err());
        assert!(Thresholds::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn label_bits_domain() {
        assert_eq!(Labels::from_bits(&[0, 1]), Some(Labels::new(vec![false, true])));
        assert_eq!(Labels::from_bits(&[2]), None);
    }
}
