//! Token-reduction accounting.
//!
//! A conversation is forwarded to the downstream LLM iff it satisfies the
//! predicate; the reduction is the share of tokens that is not forwarded:
//! `100 * (1 - forwarded_tokens / total_tokens)`. Under reference labels this
//! is the expected reduction, under model predictions the actual reduction.

use crate::conversation::Conversation;
use crate::filter::Predicate;
use crate::intent::Labels;
use crate::tokens::{conversation_tokens, TokenCounter};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TokenSplit {
    pub total_tokens: u64,
    pub forwarded_tokens: u64,
}

impl TokenSplit {
    pub fn filtered_tokens(&self) -> u64 {
        self.total_tokens - self.forwarded_tokens
    }

    pub fn reduction_pct(&self) -> Result<f64> {
        reduction_pct(self.forwarded_tokens, self.total_tokens)
    }
}

pub fn reduction_pct(forwarded_tokens: u64, total_tokens: u64) -> Result<f64> {
    if total_tokens == 0 {
        return Err(Error::ZeroTokens);
    }
    Ok(100.0 * (1.0 - forwarded_tokens as f64 / total_tokens as f64))
}

/// Splits the corpus tokens by `decisions` (one label vector per
/// conversation).
pub fn token_split<'a, C>(
    convs: &[Conversation],
    decisions: impl IntoIterator<Item = &'a Labels>,
    predicate: Predicate,
    counter: &C,
) -> Result<TokenSplit>
where
    C: TokenCounter + ?Sized,
{
    let mut total = 0u64;
    let mut forwarded = 0u64;
    let mut seen = 0usize;
    let mut decisions = decisions.into_iter();
    for conv in convs {
        let labels = decisions.next().ok_or(Error::PredictionCoverage(seen, convs.len()))?;
        seen += 1;
        let tokens = conversation_tokens(conv, counter) as u64;
        total += tokens;
        if predicate.matches(labels) {
            forwarded += tokens;
        }
    }
    let extra = decisions.count();
    if extra > 0 {
        return Err(Error::PredictionCoverage(seen + extra, convs.len()));
    }
    Ok(TokenSplit { total_tokens: total, forwarded_tokens: forwarded })
}

fn reference_labels(conv: &Conversation) -> Result<&Labels> {
    conv.labels.as_ref().ok_or_else(|| Error::UnlabeledConversation(conv.id.clone()))
}

/// Token split under the conversations' reference labels.
pub fn reference_split<C: TokenCounter + ?Sized>(
    convs: &[Conversation],
    predicate: Predicate,
    counter: &C,
) -> Result<TokenSplit> {
    let labels = convs.iter().map(reference_labels).collect::<Result<alloc::vec::Vec<_>>>()?;
    token_split(convs, labels, predicate, counter)
}

pub fn expected_reduction<C: TokenCounter + ?Sized>(
    convs: &[Conversation],
    predicate: Predicate,
    counter: &C,
) -> Result<f64> {
    reference_split(convs, predicate, counter)?.reduction_pct()
}

pub fn actual_reduction<C: TokenCounter + ?Sized>(
    convs: &[Conversation],
    predictions: &[Labels],
    predicate: Predicate,
    counter: &C,
) -> Result<f64> {
    if predictions.len() != convs.len() {
        return Err(Error::PredictionCoverage(predictions.len(), convs.len()));
    }
    token_split(convs, predictions, predicate, counter)?.reduction_pct()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conversation::Turn;
    use crate::tokens::WhitespaceCounter;
    use alloc::format;
    use alloc::string::String;
    use alloc::vec;
    use alloc::vec::Vec;

    fn corpus(tokens: &[usize], positive: &[bool]) -> Vec<Conversation> {
        tokens
            .iter()
            .zip(positive)
            .enumerate()
            .map(|(i, (&n, &p))| {
                let text: String = (0..n).map(|j| format!("w{j} ")).collect();
                let mut c = Conversation::new(format!("c{i}"), "d", vec![Turn::new("s", text)]);
                c.labels = Some(Labels::new(vec![p, false]));
                c
            })
            .collect()
    }

    #[test]
    fn expected_hand_sum() {
        let convs = corpus(&[10, 20, 30], &[false, true, false]);
        let r = expected_reduction(&convs, Predicate::Intent(0), &WhitespaceCounter).unwrap();
        assert!((r - 100.0 * (1.0 - 20.0 / 60.0)).abs() < 1e-9);
        assert!((r - 66.67).abs() < 5e-3);
    }

    #[test]
    fn expected_extremes() {
        let all = corpus(&[3, 4], &[true, true]);
        assert_eq!(expected_reduction(&all, Predicate::Intent(0), &WhitespaceCounter).unwrap(), 0.0);
        let none = corpus(&[3, 4], &[false, false]);
        assert_eq!(expected_reduction(&none, Predicate::Intent(0), &WhitespaceCounter).unwrap(), 100.0);
        assert_eq!(expected_reduction(&none, Predicate::Any, &WhitespaceCounter).unwrap(), 100.0);
    }

    #[test]
    fn zero_tokens_undefined() {
        assert_eq!(expected_reduction(&[], Predicate::Any, &WhitespaceCounter), Err(Error::ZeroTokens));
    }

    #[test]
    fn actual_examples() {
        let convs = corpus(&[10, 20, 30], &[false, true, false]);
        let pos = Labels::new(vec![true, false]);
        let neg = Labels::new(vec![false, false]);

        let all = vec![pos.clone(), pos.clone(), pos.clone()];
        assert_eq!(actual_reduction(&convs, &all, Predicate::Intent(0), &WhitespaceCounter).unwrap(), 0.0);

        let oracle: Vec<Labels> = convs.iter().map(|c| c.labels.clone().unwrap()).collect();
        assert_eq!(
            actual_reduction(&convs, &oracle, Predicate::Intent(0), &WhitespaceCounter).unwrap(),
            expected_reduction(&convs, Predicate::Intent(0), &WhitespaceCounter).unwrap()
        );

        let p13 = vec![pos.clone(), neg.clone(), pos];
        let r = actual_reduction(&convs, &p13, Predicate::Intent(0), &WhitespaceCounter).unwrap();
        assert!((r - 100.0 * (1.0 - 40.0 / 60.0)).abs() < 1e-9);

        assert_eq!(
            actual_reduction(&convs, &p13[..2], Predicate::Intent(0), &WhitespaceCounter),
            Err(Error::PredictionCoverage(2, 3))
        );
    }

    #[test]
    fn unlabeled_reference_is_an_error() {
        let mut convs = corpus(&[1], &[true]);
        convs[0].labels = None;
        assert!(matches!(
            expected_reduction(&convs, Predicate::Any, &WhitespaceCounter),
            Err(Error::UnlabeledConversation(_))
        ));
    }
}
