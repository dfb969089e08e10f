//! Token counting.

use alloc::string::String;

use crate::conversation::Conversation;

/// Counts tokens in a piece of text. The same counter has to be used for every
/// quantity compared within one report.
pub trait TokenCounter {
    fn count(&self, text: &str) -> usize;
}

impl<T: TokenCounter + ?Sized> TokenCounter for &T {
    fn count(&self, text: &str) -> usize {
        (**self).count(text)
    }
}

/// Number of maximal runs of non-whitespace characters.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceCounter;

impl TokenCounter for WhitespaceCounter {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// Tokens of a whole conversation: the sum over its turn texts. Speaker names
/// and separators are not counted.
pub fn conversation_tokens<C: TokenCounter + ?Sized>(conv: &Conversation, counter: &C) -> usize {
    conv.turns.iter().map(|t| counter.count(&t.text)).sum()
}

/// Longest whitespace-delimited prefix of `text` whose count under `counter`
/// stays within `budget`. Always keeps at least the first word.
pub fn truncate_to_budget<C: TokenCounter + ?Sized>(text: &str, budget: usize, counter: &C) -> String {
    if counter.count(text) <= budget {
        return text.into();
    }
    // Word end offsets; binary search over how many words to keep.
    let mut ends = alloc::vec::Vec::new();
    let mut in_word = false;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if in_word {
                ends.push(i);
            }
            in_word = false;
        } else {
            in_word = true;
        }
    }
    if in_word {
        ends.push(text.len());
    }
    let (mut lo, mut hi) = (1usize, ends.len());
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if counter.count(&text[..ends[mid - 1]]) <= budget {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    match ends.get(lo.max(1) - 1) {
        Some(&end) => text[..end].trim_start().into(),
        None => String::new(),
    }
}
