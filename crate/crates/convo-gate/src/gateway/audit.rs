//! Append-only decision log with a single writer task, and its offline
//! replay check.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use convo_gate_core::filter::Predicate;
use convo_gate_core::intent::{decide, Thresholds};
use convo_gate_core::{IntentSchema, Scores};
use tokio::io::AsyncWriteExt;
use tokio::sync::{mpsc, oneshot};

use super::{Decision, FilterDecision};
use crate::error::{GateError, Result};

enum Msg {
    Line(String),
    Flush(oneshot::Sender<()>),
}

/// Handle to the writer task. Cloning shares the same task.
#[derive(Debug, Clone)]
pub struct AuditLog {
    tx: mpsc::UnboundedSender<Msg>,
    path: PathBuf,
}

impl AuditLog {
    /// Opens `path` for appending and starts the writer on the current tokio
    /// runtime.
    pub async fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            tokio::fs::create_dir_all(dir).await.map_err(GateError::io(dir))?;
        }
        let file =
            tokio::fs::OpenOptions::new().create(true).append(true).open(&path).await.map_err(GateError::io(&path))?;
        let (tx, mut rx) = mpsc::unbounded_channel::<Msg>();
        let task_path = path.clone();
        tokio::spawn(async move {
            let mut out = tokio::io::BufWriter::new(file);
            while let Some(msg) = rx.recv().await {
                let result = match msg {
                    Msg::Line(line) => {
                        let mut r = out.write_all(line.as_bytes()).await;
                        if r.is_ok() {
                            r = out.write_all(b"\n").await;
                        }
                        if r.is_ok() && rx.is_empty() {
                            r = out.flush().await;
                        }
                        r
                    }
                    Msg::Flush(done) => {
                        let r = out.flush().await;
                        let _ = done.send(());
                        r
                    }
                };
                if let Err(e) = result {
                    log::error!("audit log {}: {e}", task_path.display());
                }
            }
            let _ = out.flush().await;
        });
        Ok(Self { tx, path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn record(&self, decision: &FilterDecision) {
        let line = serde_json::to_string(decision).expect("decision serializes");
        if self.tx.send(Msg::Line(line)).is_err() {
            log::error!("audit writer for {} has stopped", self.path.display());
        }
    }

    /// Resolves once every record sent before the call is on disk.
    pub async fn flush(&self) {
        let (done, wait) = oneshot::channel();
        if self.tx.send(Msg::Flush(done)).is_ok() {
            let _ = wait.await;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct AuditReplay {
    pub records: usize,
    pub forwarded: usize,
    pub errored: usize,
    pub total_tokens: u64,
    pub forwarded_tokens: u64,
    pub filtered_tokens: u64,
    /// Snippet ids whose logged decision disagrees with the predicate applied
    /// to the logged scores.
    pub violations: Vec<String>,
}

/// Re-derives every logged decision from its scores and checks it against
/// the logged one. Errored records are forwarded only under fail-open.
pub fn replay_audit(
    path: impl AsRef<Path>,
    schema: &IntentSchema,
    thresholds: &Thresholds,
    predicate: Predicate,
    fail_open: bool,
) -> Result<AuditReplay> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(GateError::io(path))?;
    let mut out = AuditReplay::default();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(GateError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let line_err = |reason: String| GateError::Line { path: path.to_path_buf(), line: i + 1, reason };
        let d: FilterDecision = serde_json::from_str(&line).map_err(|e| line_err(e.to_string()))?;
        out.records += 1;
        out.total_tokens += d.token_count;
        let forwarded = d.decision == Decision::Forward;
        if forwarded {
            out.forwarded += 1;
            out.forwarded_tokens += d.token_count;
        } else {
            out.filtered_tokens += d.token_count;
        }
        let should_forward = if d.errored {
            out.errored += 1;
            fail_open
        } else {
            let scores = scores_in_order(&d.scores, schema).map_err(line_err)?;
            predicate.matches(&decide(&scores, thresholds)?)
        };
        if forwarded != should_forward {
            out.violations.push(d.snippet_id.clone());
        }
    }
    Ok(out)
}

fn scores_in_order(map: &BTreeMap<String, f64>, schema: &IntentSchema) -> std::result::Result<Scores, String> {
    schema
        .ids()
        .map(|id| map.get(id).copied().ok_or_else(|| format!("no score for intent {id:?}")))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Scores::new)
}
