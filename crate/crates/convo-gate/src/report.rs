//! Per-dataset evaluation reports: per-intent metrics and expected/actual
//! token reduction for each predicate.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use convo_gate_core::filter::{IntentScorer, Predicate, SegmentationConfig};
use convo_gate_core::intent::Thresholds;
use convo_gate_core::metrics::{prf1, ConfusionCounts};
use convo_gate_core::reduction::{reduction_pct, reference_split, token_split};
use convo_gate_core::tokens::TokenCounter;
use convo_gate_core::train::predict_corpus;
use convo_gate_core::{Conversation, IntentSchema, Labels};
use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentMetrics {
    pub intent: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateReduction {
    pub predicate: String,
    pub reference_tokens: u64,
    pub prediction_tokens: u64,
    pub expected_reduction_pct: f64,
    pub actual_reduction_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub dataset: String,
    pub conversations: usize,
    pub total_tokens: u64,
    pub metrics: Vec<IntentMetrics>,
    pub reductions: Vec<PredicateReduction>,
}

/// Report for one dataset given predictions aligned with `convs`.
pub fn dataset_report<C: TokenCounter + ?Sized>(
    name: &str,
    convs: &[Conversation],
    predictions: &[Labels],
    schema: &IntentSchema,
    predicates: &[Predicate],
    counter: &C,
) -> Result<DatasetReport> {
    let mut counts = ConfusionCounts::new(schema.len());
    for (p, c) in predictions.iter().zip(convs) {
        let reference = c.labels.as_ref().ok_or_else(|| convo_gate_core::Error::UnlabeledConversation(c.id.clone()))?;
        counts.record(p, reference)?;
    }
    let metrics = schema
        .ids()
        .enumerate()
        .map(|(k, id)| {
            let c = counts.intent(k);
            let m = prf1(c);
            IntentMetrics {
                intent: id.into(),
                tp: c.tp,
                fp: c.fp,
                fn_: c.fn_,
                tn: c.tn,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                degenerate: m.degenerate,
            }
        })
        .collect();
    let mut reductions = Vec::new();
    let mut total_tokens = 0;
    for &p in predicates {
        let reference = reference_split(convs, p, counter)?;
        let predicted = token_split(convs, predictions, p, counter)?;
        total_tokens = reference.total_tokens;
        reductions.push(PredicateReduction {
            predicate: p.name(schema),
            reference_tokens: reference.forwarded_tokens,
            prediction_tokens: predicted.forwarded_tokens,
            expected_reduction_pct: reduction_pct(reference.forwarded_tokens, reference.total_tokens)?,
            actual_reduction_pct: reduction_pct(predicted.forwarded_tokens, predicted.total_tokens)?,
        });
    }
    Ok(DatasetReport { dataset: name.into(), conversations: convs.len(), total_tokens, metrics, reductions })
}

/// Reports for every dataset, ordered by dataset name.
pub fn build_report<S, C>(
    datasets: &[(String, Vec<Conversation>)],
    model: &S,
    schema: &IntentSchema,
    thresholds: &Thresholds,
    predicates: &[Predicate],
    seg: &SegmentationConfig,
    counter: &C,
) -> Result<Vec<DatasetReport>>
where
    S: IntentScorer + ?Sized,
    C: TokenCounter + ?Sized,
{
    let mut order: Vec<&(String, Vec<Conversation>)> = datasets.iter().collect();
    order.sort_by(|a, b| a.0.cmp(&b.0));
    order
        .into_iter()
        .map(|(name, convs)| {
            let predictions = predict_corpus(model, convs, seg, counter, thresholds)?;
            dataset_report(name, convs, &predictions, schema, predicates, counter)
        })
        .collect()
}

/// Aligned plain-text rendering: a metric table and a reduction table.
pub fn render_text(reports: &[DatasetReport]) -> String {
    let mut out = String::new();
    let mut rows = vec![vec![
        "dataset".to_string(),
        "intent".into(),
        "precision".into(),
        "recall".into(),
        "f1".into(),
        "tp".into(),
        "fp".into(),
        "fn".into(),
        "tn".into(),
    ]];
    for r in reports {
        for m in &r.metrics {
            rows.push(vec![
                r.dataset.clone(),
                m.intent.clone(),
                format!("{:.4}", m.precision),
                format!("{:.4}", m.recall),
                format!("{:.4}{}", m.f1, if m.degenerate { "*" } else { "" }),
                m.tp.to_string(),
                m.fp.to_string(),
                m.fn_.to_string(),
                m.tn.to_string(),
            ]);
        }
    }
    out.push_str(&table(&rows));
    out.push('\n');
    let mut rows = vec![vec![
        "dataset".to_string(),
        "predicate".into(),
        "total tokens".into(),
        "expected %".into(),
        "actual %".into(),
    ]];
    for r in reports {
        for p in &r.reductions {
            rows.push(vec![
                r.dataset.clone(),
                p.predicate.clone(),
                r.total_tokens.to_string(),
                format!("{:.2}", p.expected_reduction_pct),
                format!("{:.2}", p.actual_reduction_pct),
            ]);
        }
    }
    out.push_str(&table(&rows));
    if reports.iter().any(|r| r.metrics.iter().any(|m| m.degenerate)) {
        out.push_str("* a metric had a zero denominator and is reported as 0\n");
    }
    out
}

fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.first().map_or(0, Vec::len);
    let widths: Vec<usize> = (0..cols).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            let pad = widths[c] - cell.chars().count();
            if c == 0 || c == 1 {
                let _ = write!(out, "{cell}{}", " ".repeat(pad));
            } else {
                let _ = write!(out, "{}{cell}", " ".repeat(pad));
            }
            out.push_str(if c + 1 == cols { "\n" } else { "  " });
        }
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * cols.saturating_sub(1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

/// One report object per line.
pub fn write_jsonl(reports: &[DatasetReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(GateError::io(path))?);
    for r in reports {
        serde_json::to_writer(&mut file, r).expect("report serializes");
        file.write_all(b"\n").map_err(GateError::io(path))?;
    }
    file.flush().map_err(GateError::io(path))
}
