//! The conversation line format and corpus files.
//!
//! One JSON object per line:
//!
//! ```text
//! {"id": "...", "source_dataset": "...",
//!  "turns": [{"speaker": "...", "text": "...", "labels": {"<intent>": 0|1}}],
//!  "labels": {"<intent>": 0|1}, "notes": "..."}
//! ```
//!
//! Label maps carry exactly the schema's intents; `labels` and `notes` are
//! optional.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use convo_gate_core::{Conversation, IntentSchema, Labels, Turn};
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{GateError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MalformedPolicy {
    #[default]
    Abort,
    /// Log the line error, keep it in [`CorpusReader::skipped`] and continue.
    Skip,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TurnRecord<L> {
    speaker: String,
    text: String,
    #[serde(default = "Option::default", skip_serializing_if = "Option::is_none")]
    labels: Option<L>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConversationRecord<L> {
    id: String,
    source_dataset: String,
    turns: Vec<TurnRecord<L>>,
    #[serde(default = "Option::default", skip_serializing_if = "Option::is_none")]
    labels: Option<L>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    notes: Option<String>,
}

/// Serializes a label vector as an object in schema order.
struct LabelMap<'a> {
    ids: &'a [String],
    labels: &'a Labels,
}

impl Serialize for LabelMap<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.ids.len()))?;
        for (id, &v) in self.ids.iter().zip(self.labels.as_slice()) {
            map.serialize_entry(id, &u8::from(v))?;
        }
        map.end()
    }
}

/// Encodes and decodes conversations against one intent schema.
#[derive(Debug, Clone)]
pub struct CorpusCodec {
    ids: Vec<String>,
}

impl CorpusCodec {
    pub fn new(schema: &IntentSchema) -> Self {
        Self { ids: schema.ids().map(String::from).collect() }
    }

    pub fn intent_ids(&self) -> &[String] {
        &self.ids
    }

    pub fn encode(&self, conv: &Conversation) -> Result<String> {
        let record = ConversationRecord {
            id: conv.id.clone(),
            source_dataset: conv.source_dataset.clone(),
            turns: conv
                .turns
                .iter()
                .map(|t| {
                    Ok(TurnRecord {
                        speaker: t.speaker.clone(),
                        text: t.text.clone(),
                        labels: self.label_map(&t.labels)?,
                    })
                })
                .collect::<Result<_>>()?,
            labels: self.label_map(&conv.labels)?,
            notes: conv.notes.clone(),
        };
        Ok(serde_json::to_string(&record).expect("label maps and strings always serialize"))
    }

    fn label_map<'a>(&'a self, labels: &'a Option<Labels>) -> Result<Option<LabelMap<'a>>> {
        match labels {
            None => Ok(None),
            Some(l) => {
                l.check_len(self.ids.len())?;
                Ok(Some(LabelMap { ids: &self.ids, labels: l }))
            }
        }
    }

    fn labels_from_map(&self, map: BTreeMap<String, u8>) -> std::result::Result<Labels, String> {
        for key in map.keys() {
            if !self.ids.contains(key) {
                return Err(format!("unknown intent {key:?}"));
            }
        }
        self.ids
            .iter()
            .map(|id| match map.get(id) {
                Some(0) => Ok(false),
                Some(1) => Ok(true),
                Some(v) => Err(format!("label {v} for {id:?} is not 0 or 1")),
                None => Err(format!("missing label for intent {id:?}")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Labels::new)
    }

    /// Parses one record without checking conversation invariants.
    pub fn decode_unchecked(&self, line: &str) -> std::result::Result<Conversation, String> {
        let record: ConversationRecord<BTreeMap<String, u8>> = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let labels = |m: Option<BTreeMap<String, u8>>| m.map(|m| self.labels_from_map(m)).transpose();
        let turns = record
            .turns
            .into_iter()
            .map(|t| Ok(Turn { speaker: t.speaker, text: t.text, labels: labels(t.labels)? }))
            .collect::<std::result::Result<Vec<_>, String>>()?;
        Ok(Conversation {
            id: record.id,
            source_dataset: record.source_dataset,
            turns,
            labels: labels(record.labels)?,
            notes: record.notes,
        })
    }

    /// Parses and validates one record.
    pub fn decode(&self, line: &str) -> std::result::Result<Conversation, String> {
        let conv = self.decode_unchecked(line)?;
        conv.validate(self.ids.len()).map_err(|e| e.to_string())?;
        Ok(conv)
    }
}

/// Streaming reader over a corpus file. Blank lines are ignored.
pub struct CorpusReader {
    path: PathBuf,
    lines: std::io::Lines<BufReader<File>>,
    line_no: usize,
    codec: CorpusCodec,
    policy: MalformedPolicy,
    validate: bool,
    failed: bool,
    skipped: Vec<GateError>,
}

impl CorpusReader {
    /// Errors that were skipped under [`MalformedPolicy::Skip`].
    pub fn skipped(&self) -> &[GateError] {
        &self.skipped
    }

    /// Yields records without checking invariants such as non-empty turn
    /// text; used when ingesting raw sources.
    pub fn unchecked(mut self) -> Self {
        self.validate = false;
        self
    }
}

impl Iterator for CorpusReader {
    type Item = Result<Conversation>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(source) => {
                    self.failed = true;
                    return Some(Err(GateError::Io { path: self.path.clone(), source }));
                }
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let decoded = if self.validate { self.codec.decode(&line) } else { self.codec.decode_unchecked(&line) };
            match decoded {
                Ok(conv) => return Some(Ok(conv)),
                Err(reason) => {
                    let err = GateError::Line { path: self.path.clone(), line: self.line_no, reason };
                    match self.policy {
                        MalformedPolicy::Abort => {
                            self.failed = true;
                            return Some(Err(err));
                        }
                        MalformedPolicy::Skip => {
                            log::warn!("skipping {err}");
                            self.skipped.push(err);
                        }
                    }
                }
            }
        }
    }
}

pub fn read_corpus(path: impl AsRef<Path>, schema: &IntentSchema, policy: MalformedPolicy) -> Result<CorpusReader> {
    let path = path.as_ref().to_path_buf();
    let file = File::open(&path).map_err(GateError::io(&path))?;
    Ok(CorpusReader {
        lines: BufReader::new(file).lines(),
        path,
        line_no: 0,
        codec: CorpusCodec::new(schema),
        policy,
        validate: true,
        failed: false,
        skipped: Vec::new(),
    })
}

/// Reads a whole corpus, aborting on the first malformed line.
pub fn load_corpus(path: impl AsRef<Path>, schema: &IntentSchema) -> Result<Vec<Conversation>> {
    read_corpus(path, schema, MalformedPolicy::Abort)?.collect()
}

/// Writes one record per line and returns the record count.
pub fn write_corpus<'a>(
    convs: impl IntoIterator<Item = &'a Conversation>,
    path: impl AsRef<Path>,
    schema: &IntentSchema,
) -> Result<usize> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(GateError::io(dir))?;
    }
    let codec = CorpusCodec::new(schema);
    let file = File::create(path).map_err(GateError::io(path))?;
    let mut out = BufWriter::new(file);
    let mut written = 0;
    let partial = |written, source| GateError::PartialWrite { path: path.to_path_buf(), written, source };
    for conv in convs {
        let line = codec.encode(conv)?;
        out.write_all(line.as_bytes()).and_then(|_| out.write_all(b"\n")).map_err(|e| partial(written, e))?;
        written += 1;
    }
    out.flush().map_err(|e| partial(written, e))?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> IntentSchema {
        IntentSchema::default_schema()
    }

    #[test]
    fn label_map_follows_schema_order() {
        let mut c = Conversation::new("c1", "d", vec![Turn::labeled("A", "hi", Labels::new(vec![true, false]))]);
        c.derive_labels().unwrap();
        let line = CorpusCodec::new(&schema()).encode(&c).unwrap();
        assert_eq!(
            line,
            r#"{"id":"c1","source_dataset":"d","turns":[{"speaker":"A","text":"hi","labels":{"action-triggering":1,"information-seeking":0}}],"labels":{"action-triggering":1,"information-seeking":0}}"#
        );
    }

    #[test]
    fn decode_rejects_bad_labels() {
        let codec = CorpusCodec::new(&schema());
        let base = r#"{"id":"c","source_dataset":"d","turns":[{"speaker":"","text":"x"}],"labels":LABELS}"#;
        for (labels, needle) in [
            (r#"{"action-triggering":2,"information-seeking":0}"#, "not 0 or 1"),
            (r#"{"action-triggering":1}"#, "missing label"),
            (r#"{"action-triggering":1,"information-seeking":0,"other":1}"#, "unknown intent"),
        ] {
            let err = codec.decode(&base.replace("LABELS", labels)).unwrap_err();
            assert!(err.contains(needle), "{err}");
        }
        assert!(codec.decode(r#"{"id":"c","source_dataset":"d","turns":[]}"#).is_err());
        assert!(codec.decode(r#"{"id":"c","source_dataset":"d","turns":[{"speaker":"a","text":"  "}]}"#).is_err());
        assert!(codec
            .decode(r#"{"id":"c","source_dataset":"d","turns":[{"speaker":"a","text":"x"}],"extra":1}"#)
            .is_err());
    }
}
