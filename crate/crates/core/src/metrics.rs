//! Per-intent confusion counts and precision / recall / F1 for the positive
//! class.

use alloc::vec;
use alloc::vec::Vec;

use crate::intent::Labels;
use crate::Result;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, predicted: bool, reference: bool) {
        match (predicted, reference) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

/// One [`Confusion`] per intent, in schema order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionCounts(pub Vec<Confusion>);

impl ConfusionCounts {
    pub fn new(intents: usize) -> Self {
        Self(vec![Confusion::default(); intents])
    }

    pub fn record(&mut self, predicted: &Labels, reference: &Labels) -> Result<()> {
        predicted.check_len(self.0.len())?;
        reference.check_len(self.0.len())?;
        for (k, c) in self.0.iter_mut().enumerate() {
            c.record(predicted[k], reference[k]);
        }
        Ok(())
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a Labels, &'a Labels)>, intents: usize) -> Result<Self> {
        let mut out = Self::new(intents);
        for (p, r) in pairs {
            out.record(p, r)?;
        }
        Ok(out)
    }

    pub fn intent(&self, k: usize) -> &Confusion {
        &self.0[k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// A denominator was zero and the affected metric was reported as 0.
    pub degenerate: bool,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn prf1(c: &Confusion) -> Prf1 {
    let (precision, d1) = ratio(c.tp, c.tp + c.fp);
    let (recall, d2) = ratio(c.tp, c.tp + c.fn_);
    let (f1, d3) = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_);
    Prf1 { precision, recall, f1, degenerate: d1 || d2 || d3 }
}

/// Mean F1 over intents, the checkpoint-selection criterion.
pub fn mean_f1(counts: &ConfusionCounts) -> f64 {
    if counts.0.is_empty() {
        return 0.0;
    }
    counts.0.iter().map(|c| prf1(c).f1).sum::<f64>() / counts.0.len() as f64
}
