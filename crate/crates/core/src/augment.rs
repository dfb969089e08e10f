//! Rolling-window augmentation and context-budget segmentation.
//!
//! Window sampling is online: segments are drawn fresh for every batch and
//! never written back into the corpus.

use alloc::format;
use alloc::vec::Vec;

use crate::conversation::{render_model_input, Conversation, Segment, TurnRange};
use crate::rng::SplitMix64;
use crate::tokens::TokenCounter;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct WindowConfig {
    pub min_turns: usize,
    pub max_turns: usize,
    /// Upper bound on the windows drawn per conversation.
    pub max_segments: usize,
    /// Probability that a batch is augmented at all.
    pub batch_probability: f64,
    pub seed: u64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { min_turns: 1, max_turns: 5, max_segments: 2, batch_probability: 0.5, seed: 0 }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_turns == 0 || self.min_turns > self.max_turns {
            return Err(Error::InvalidConfig(format!(
                "window turns must satisfy 1 <= min ({}) <= max ({})",
                self.min_turns, self.max_turns
            )));
        }
        if !(0.0..=1.0).contains(&self.batch_probability) {
            return Err(Error::InvalidConfig(format!(
                "batch probability {} is outside [0, 1]",
                self.batch_probability
            )));
        }
        Ok(())
    }
}

/// Draws up to `max_segments` windows from `conv`.
///
/// Each draw picks a length uniformly in `[min_turns, min(max_turns, n)]` and
/// then a start uniformly in `[0, n - length]`. Repeated `(start, length)`
/// pairs are dropped, so fewer than `max_segments` windows may come back.
/// Conversations shorter than `min_turns` yield nothing and consume no draws.
pub fn sample_windows(conv: &Conversation, cfg: &WindowConfig, rng: &mut SplitMix64) -> Result<Vec<Segment>> {
    cfg.validate()?;
    let n = conv.turns.len();
    if n < cfg.min_turns || cfg.max_segments == 0 {
        return Ok(Vec::new());
    }
    let longest = cfg.max_turns.min(n);
    let mut seen: Vec<TurnRange> = Vec::with_capacity(cfg.max_segments);
    let mut out = Vec::with_capacity(cfg.max_segments);
    for _ in 0..cfg.max_segments {
        let len = rng.range_inclusive(cfg.min_turns, longest);
        let start = rng.range_inclusive(0, n - len);
        let range = TurnRange::new(start, start + len);
        if seen.contains(&range) {
            continue;
        }
        seen.push(range);
        out.push(Segment { conversation_id: conv.id.clone(), range, labels: conv.range_labels(range)? });
    }
    Ok(out)
}

/// With probability `batch_probability` (one draw per batch) returns the
/// windows of every conversation in the batch, in batch order; otherwise
/// nothing.
pub fn plan_batch_augmentation(
    batch: &[&Conversation],
    cfg: &WindowConfig,
    rng: &mut SplitMix64,
) -> Result<Vec<Segment>> {
    cfg.validate()?;
    if !rng.bernoulli(cfg.batch_probability) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for conv in batch {
        out.extend(sample_windows(conv, cfg, rng)?);
    }
    Ok(out)
}

/// A piece of a conversation that fits the context budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetChunk {
    pub range: TurnRange,
    /// Set when a single turn alone exceeds the budget.
    pub over_budget: bool,
}

/// Greedy left-to-right packing of consecutive turns so that each chunk's
/// rendered model input counts at most `budget` tokens. Chunks are disjoint,
/// contiguous and cover every turn in order. A turn that does not fit on its
/// own becomes a chunk flagged `over_budget`.
pub fn split_to_context_budget<C: TokenCounter + ?Sized>(
    conv: &Conversation,
    budget: usize,
    counter: &C,
    separator: &str,
) -> Result<Vec<BudgetChunk>> {
    if budget == 0 {
        return Err(Error::InvalidConfig("context budget must be at least 1".into()));
    }
    let n = conv.turns.len();
    let fits = |range: TurnRange| -> Result<bool> {
        Ok(counter.count(&render_model_input(conv, range, separator)?) <= budget)
    };
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        if !fits(TurnRange::new(start, start + 1))? {
            out.push(BudgetChunk { range: TurnRange::new(start, start + 1), over_budget: true });
            start += 1;
            continue;
        }
        let mut end = start + 1;
        while end < n && fits(TurnRange::new(start, end + 1))? {
            end += 1;
        }
        out.push(BudgetChunk { range: TurnRange::new(start, end), over_budget: false });
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conversation::Turn;
    use crate::intent::Labels;
    use crate::tokens::WhitespaceCounter;
    use alloc::string::ToString;
    use alloc::vec;

    fn conv(n: usize) -> Conversation {
        let turns =
            (0..n).map(|i| Turn::labeled("s", i.to_string(), Labels::new(vec![i % 3 == 0, i % 4 == 1]))).collect();
        Conversation::new("c", "d", turns)
    }

    #[test]
    fn ten_turns_default_config() {
        let c = conv(10);
        let cfg = WindowConfig { seed: 1, ..Default::default() };
        let mut rng = SplitMix64::new(cfg.seed);
        let segs = sample_windows(&c, &cfg, &mut rng).unwrap();
        assert!(!segs.is_empty() && segs.len() <= 2);
        for s in &segs {
            assert!((1..=5).contains(&s.range.len()));
            assert!(s.range.end <= 10);
            assert_eq!(s.labels, c.range_labels(s.range).unwrap());
        }
    }

    #[test]
    fn single_turn_windows() {
        let c = conv(1);
        let mut rng = SplitMix64::new(5);
        let segs = sample_windows(&c, &WindowConfig::default(), &mut rng).unwrap();
        // the only window is [0, 1), the second draw repeats it
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].range, TurnRange::new(0, 1));
    }

    #[test]
    fn shorter_than_minimum_is_empty() {
        let c = conv(3);
        let cfg = WindowConfig { min_turns: 4, max_turns: 5, ..Default::default() };
        let mut rng = SplitMix64::new(5);
        let before = rng.clone();
        assert!(sample_windows(&c, &cfg, &mut rng).unwrap().is_empty());
        assert_eq!(rng, before);
    }

    #[test]
    fn unlabeled_turns_are_an_error() {
        let mut c = conv(4);
        for t in &mut c.turns {
            t.labels = None;
        }
        let mut rng = SplitMix64::new(0);
        assert!(matches!(sample_windows(&c, &WindowConfig::default(), &mut rng), Err(Error::UnlabeledTurn { .. })));
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            WindowConfig { min_turns: 0, ..Default::default() },
            WindowConfig { min_turns: 3, max_turns: 2, ..Default::default() },
            WindowConfig { batch_probability: 1.5, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn batch_probability_extremes() {
        let convs: Vec<Conversation> = (0..3).map(|_| conv(10)).collect();
        let batch: Vec<&Conversation> = convs.iter().collect();
        let mut rng = SplitMix64::new(11);
        let never = WindowConfig { batch_probability: 0.0, ..Default::default() };
        for _ in 0..100 {
            assert!(plan_batch_augmentation(&batch, &never, &mut rng).unwrap().is_empty());
        }
        let always = WindowConfig { batch_probability: 1.0, ..Default::default() };
        for _ in 0..100 {
            let segs = plan_batch_augmentation(&batch, &always, &mut rng).unwrap();
            assert!(!segs.is_empty() && segs.len() <= 6);
        }
    }

    #[test]
    fn half_probability_rate_within_three_sigma() {
        // 1000 Bernoulli(0.5) trials: sigma = sqrt(1000 * 0.25) ~ 15.8, so 3 sigma
        // is +-47.4 batches, i.e. the fraction must lie in [0.4526, 0.5474],
        // which contains the stated [0.46, 0.54] band.
        let convs: Vec<Conversation> = (0..2).map(|_| conv(6)).collect();
        let batch: Vec<&Conversation> = convs.iter().collect();
        let cfg = WindowConfig::default();
        let mut rng = SplitMix64::new(2024);
        let augmented =
            (0..1000).filter(|_| !plan_batch_augmentation(&batch, &cfg, &mut rng).unwrap().is_empty()).count();
        let frac = augmented as f64 / 1000.0;
        assert!((0.46..=0.54).contains(&frac), "fraction {frac}");
    }

    fn text_conv(texts: &[&str]) -> Conversation {
        Conversation::new("t", "d", texts.iter().map(|t| Turn::new("s", *t)).collect())
    }

    #[test]
    fn budget_fits_whole_conversation() {
        let c = text_conv(&["a b", "c d"]);
        let chunks = split_to_context_budget(&c, 100, &WhitespaceCounter, "[SEP]").unwrap();
        assert_eq!(chunks, vec![BudgetChunk { range: c.full_range(), over_budget: false }]);
    }

    #[test]
    fn budget_packs_pairs() {
        // two turns render as 3 + 1 + 3 = 7 tokens, three would be 11
        let c = text_conv(&["a b c", "d e f", "g h i", "j k l"]);
        let chunks = split_to_context_budget(&c, 7, &WhitespaceCounter, "[SEP]").unwrap();
        let ranges: Vec<_> = chunks.iter().map(|c| (c.range.start, c.range.end, c.over_budget)).collect();
        assert_eq!(ranges, vec![(0, 2, false), (2, 4, false)]);
    }

    #[test]
    fn oversized_turn_is_flagged() {
        let long: alloc::string::String = (0..100).map(|i| format!("w{i} ")).collect();
        let c = text_conv(&[long.as_str()]);
        let chunks = split_to_context_budget(&c, 10, &WhitespaceCounter, "[SEP]").unwrap();
        assert_eq!(chunks, vec![BudgetChunk { range: TurnRange::new(0, 1), over_budget: true }]);
        assert!(split_to_context_budget(&c, 0, &WhitespaceCounter, "[SEP]").is_err());
    }
}
