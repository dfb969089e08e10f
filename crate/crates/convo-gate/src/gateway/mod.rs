//! The filtering gateway: classifies incoming snippets, forwards the ones that
//! satisfy the predicate to a downstream endpoint and keeps token accounting.
//!
//! Routes: `POST /v1/classify`, `POST /v1/filter`, `GET /v1/stats`,
//! `GET /healthz`. Snippets use the conversation line format's object shape;
//! `id` and `source_dataset` may be omitted.

pub mod audit;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use convo_gate_core::filter::{classify_conversation, Predicate, SegmentationConfig, SnippetClassification};
use convo_gate_core::intent::Thresholds;
use convo_gate_core::tokens::{conversation_tokens, TokenCounter};
use convo_gate_core::{Conversation, IntentSchema};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub use audit::{replay_audit, AuditLog, AuditReplay};

use crate::config::CounterKind;
use crate::corpus::CorpusCodec;
use crate::error::{GateError, Result};
use crate::model::{ClassifierModel, Counter};

pub const LIVE_DATASET: &str = "live";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub model: Option<PathBuf>,
    /// An intent id or "any".
    pub predicate: String,
    /// Per-intent threshold overrides.
    pub thresholds: BTreeMap<String, f64>,
    pub downstream: Option<String>,
    pub downstream_timeout_ms: u64,
    pub counter: CounterKind,
    pub listen: String,
    pub audit_log: Option<PathBuf>,
    /// Forward snippets whose classification failed instead of dropping them.
    pub fail_open: bool,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            model: None,
            predicate: convo_gate_core::intent::ANY.into(),
            thresholds: BTreeMap::new(),
            downstream: None,
            downstream_timeout_ms: 30_000,
            counter: CounterKind::Whitespace,
            listen: "127.0.0.1:8080".into(),
            audit_log: None,
            fail_open: false,
        }
    }
}

/// Model thresholds with the configured overrides applied.
pub fn effective_thresholds(
    model: &ClassifierModel,
    schema: &IntentSchema,
    overrides: &BTreeMap<String, f64>,
) -> Result<Thresholds> {
    let mut thresholds = model.thresholds().clone();
    for (id, &value) in overrides {
        let k = schema
            .index_of(id)
            .ok_or_else(|| GateError::Usage(format!("threshold override for unknown intent {id:?}")))?;
        thresholds.set(k, value)?;
    }
    Ok(thresholds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Forward,
    Filter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub snippet_id: String,
    pub scores: BTreeMap<String, f64>,
    pub decision: Decision,
    pub matched_intents: Vec<String>,
    pub token_count: u64,
    pub chunks: usize,
    #[serde(default)]
    pub errored: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GatewayStats {
    pub total_snippets: u64,
    pub forwarded_snippets: u64,
    pub filtered_snippets: u64,
    pub errored_snippets: u64,
    pub total_tokens: u64,
    pub forwarded_tokens: u64,
    pub filtered_tokens: u64,
    pub delivery_failures: u64,
    pub per_intent_positive: BTreeMap<String, u64>,
}

impl GatewayStats {
    /// `100 * (1 - forwarded / total)` so far; `None` before any token.
    pub fn actual_reduction_pct(&self) -> Option<f64> {
        convo_gate_core::reduction::reduction_pct(self.forwarded_tokens, self.total_tokens).ok()
    }
}

/// Offline decision for one snippet: the same computation the gateway runs.
pub fn decide_snippet<C: TokenCounter + ?Sized>(
    model: &ClassifierModel,
    snippet: &Conversation,
    seg: &SegmentationConfig,
    counter: &C,
    thresholds: &Thresholds,
    predicate: Predicate,
) -> convo_gate_core::Result<(SnippetClassification, bool)> {
    let c = classify_conversation(model, snippet, seg, counter, thresholds)?;
    let forward = predicate.matches(&c.labels);
    Ok((c, forward))
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

struct Downstream {
    url: String,
    client: reqwest::Client,
}

pub struct Gateway {
    model: Arc<ClassifierModel>,
    schema: IntentSchema,
    codec: CorpusCodec,
    predicate: Predicate,
    thresholds: Thresholds,
    seg: SegmentationConfig,
    counter: Counter,
    stats: Mutex<GatewayStats>,
    audit: Option<AuditLog>,
    downstream: Option<Downstream>,
    fail_open: bool,
    next_id: AtomicU64,
}

impl Gateway {
    /// Builds a gateway around a loaded model. The model's separator replaces
    /// the configured one so rendering matches training.
    pub async fn new(
        model: Arc<ClassifierModel>,
        schema: IntentSchema,
        cfg: &GatewayConfig,
        mut seg: SegmentationConfig,
    ) -> Result<Self> {
        model.check_schema(&schema)?;
        let predicate = Predicate::parse(&cfg.predicate, &schema)?;
        let thresholds = effective_thresholds(&model, &schema, &cfg.thresholds)?;
        if seg.separator != model.separator() {
            log::info!("using the model separator {:?} instead of {:?}", model.separator(), seg.separator);
            seg.separator = model.separator().into();
        }
        let counter = Counter::new(cfg.counter, Some(&model))?;
        let audit = match &cfg.audit_log {
            Some(path) => Some(AuditLog::open(path).await?),
            None => None,
        };
        let downstream = match &cfg.downstream {
            Some(url) => Some(Downstream {
                url: url.clone(),
                client: reqwest::Client::builder()
                    .timeout(Duration::from_millis(cfg.downstream_timeout_ms))
                    .build()
                    .map_err(|e| GateError::Usage(format!("downstream client: {e}")))?,
            }),
            None => None,
        };
        let stats = GatewayStats {
            per_intent_positive: schema.ids().map(|id| (id.to_string(), 0)).collect(),
            ..Default::default()
        };
        Ok(Self {
            codec: CorpusCodec::new(&schema),
            model,
            schema,
            predicate,
            thresholds,
            seg,
            counter,
            stats: Mutex::new(stats),
            audit,
            downstream,
            fail_open: cfg.fail_open,
            next_id: AtomicU64::new(0),
        })
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    pub fn predicate(&self) -> Predicate {
        self.predicate
    }

    pub fn schema(&self) -> &IntentSchema {
        &self.schema
    }

    pub fn segmentation(&self) -> &SegmentationConfig {
        &self.seg
    }

    pub fn counter(&self) -> &Counter {
        &self.counter
    }

    pub fn stats(&self) -> GatewayStats {
        self.stats.lock().unwrap().clone()
    }

    pub async fn flush_audit(&self) {
        if let Some(a) = &self.audit {
            a.flush().await;
        }
    }

    /// Parses a snippet body. Missing `id` and `source_dataset` are filled in.
    pub fn parse_snippet(&self, body: &[u8]) -> std::result::Result<Conversation, String> {
        let mut value: serde_json::Value = serde_json::from_slice(body).map_err(|e| e.to_string())?;
        let obj = value.as_object_mut().ok_or("snippet must be a JSON object")?;
        obj.entry("source_dataset").or_insert_with(|| json!(LIVE_DATASET));
        if !obj.contains_key("id") {
            let n = self.next_id.fetch_add(1, Ordering::Relaxed);
            obj.insert("id".into(), json!(format!("snippet-{n}")));
        }
        self.codec.decode(&value.to_string())
    }

    /// Classifies a snippet, updates the counters and the audit log.
    pub fn classify(&self, snippet: &Conversation) -> FilterDecision {
        let tokens = conversation_tokens(snippet, &self.counter) as u64;
        let result = decide_snippet(&self.model, snippet, &self.seg, &self.counter, &self.thresholds, self.predicate);
        let decision = match result {
            Ok((c, forward)) => FilterDecision {
                snippet_id: snippet.id.clone(),
                scores: self.schema.ids().map(String::from).zip(c.scores.as_slice().iter().copied()).collect(),
                decision: if forward { Decision::Forward } else { Decision::Filter },
                matched_intents: self
                    .schema
                    .ids()
                    .zip(c.labels.as_slice())
                    .filter(|(_, &on)| on)
                    .map(|(id, _)| id.to_string())
                    .collect(),
                token_count: tokens,
                chunks: c.chunks,
                errored: false,
                error: None,
                timestamp_ms: now_ms(),
            },
            Err(e) => {
                log::error!("classification of {} failed: {e}", snippet.id);
                FilterDecision {
                    snippet_id: snippet.id.clone(),
                    scores: BTreeMap::new(),
                    decision: if self.fail_open { Decision::Forward } else { Decision::Filter },
                    matched_intents: Vec::new(),
                    token_count: tokens,
                    chunks: 0,
                    errored: true,
                    error: Some(e.to_string()),
                    timestamp_ms: now_ms(),
                }
            }
        };
        {
            let mut s = self.stats.lock().unwrap();
            s.total_snippets += 1;
            s.total_tokens += tokens;
            if decision.errored {
                s.errored_snippets += 1;
            }
            match decision.decision {
                Decision::Forward => {
                    s.forwarded_snippets += 1;
                    s.forwarded_tokens += tokens;
                }
                Decision::Filter => {
                    s.filtered_snippets += 1;
                    s.filtered_tokens += tokens;
                }
            }
            for id in &decision.matched_intents {
                *s.per_intent_positive.entry(id.clone()).or_default() += 1;
            }
        }
        if let Some(a) = &self.audit {
            a.record(&decision);
        }
        decision
    }

    pub fn router(self: Arc<Self>) -> Router {
        Router::new()
            .route("/v1/classify", post(classify_handler))
            .route("/v1/filter", post(filter_handler))
            .route("/v1/stats", get(stats_handler))
            .route("/healthz", get(health_handler))
            .with_state(self)
    }

    async fn classify_body(self: &Arc<Self>, body: &Bytes) -> std::result::Result<FilterDecision, Response> {
        let snippet = self
            .parse_snippet(body)
            .map_err(|e| (StatusCode::BAD_REQUEST, Json(json!({ "error": e }))).into_response())?;
        let gw = Arc::clone(self);
        tokio::task::spawn_blocking(move || gw.classify(&snippet))
            .await
            .map_err(|e| (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({ "error": e.to_string() }))).into_response())
    }

    async fn deliver(&self, decision: &FilterDecision, body: Bytes) -> std::result::Result<serde_json::Value, String> {
        let Some(ds) = &self.downstream else {
            return Ok(serde_json::Value::Null);
        };
        let scores = decision.scores.iter().map(|(k, v)| format!("{k}={v:.6}")).collect::<Vec<_>>().join(",");
        let resp = ds
            .client
            .post(&ds.url)
            .header("content-type", "application/json")
            .header("x-convo-gate-snippet", &decision.snippet_id)
            .header("x-convo-gate-decision", "forward")
            .header("x-convo-gate-intents", decision.matched_intents.join(","))
            .header("x-convo-gate-scores", scores)
            .body(body)
            .send()
            .await
            .map_err(|e| e.to_string())?;
        let status = resp.status();
        let text = resp.text().await.map_err(|e| e.to_string())?;
        if !status.is_success() {
            return Err(format!("downstream returned {status}: {text}"));
        }
        let body = serde_json::from_str(&text).unwrap_or(serde_json::Value::String(text));
        Ok(json!({ "status": status.as_u16(), "body": body }))
    }
}

fn decision_response(decision: FilterDecision, extra: Option<(&str, serde_json::Value)>) -> Response {
    let status = if decision.errored && decision.decision == Decision::Filter {
        StatusCode::SERVICE_UNAVAILABLE
    } else {
        StatusCode::OK
    };
    match extra {
        None => (status, Json(decision)).into_response(),
        Some((key, value)) => (status, Json(json!({ "decision": decision, key: value }))).into_response(),
    }
}

async fn classify_handler(State(gw): State<Arc<Gateway>>, body: Bytes) -> Response {
    match gw.classify_body(&body).await {
        Ok(d) => decision_response(d, None),
        Err(r) => r,
    }
}

async fn filter_handler(State(gw): State<Arc<Gateway>>, body: Bytes) -> Response {
    let decision = match gw.classify_body(&body).await {
        Ok(d) => d,
        Err(r) => return r,
    };
    if decision.decision == Decision::Filter {
        return decision_response(decision, Some(("downstream", serde_json::Value::Null)));
    }
    match gw.deliver(&decision, body).await {
        Ok(downstream) => decision_response(decision, Some(("downstream", downstream))),
        Err(message) => {
            gw.stats.lock().unwrap().delivery_failures += 1;
            log::warn!("delivery of {} failed: {message}", decision.snippet_id);
            let error = json!({ "snippet_id": decision.snippet_id, "message": message });
            (StatusCode::BAD_GATEWAY, Json(json!({ "decision": decision, "error": error }))).into_response()
        }
    }
}

async fn stats_handler(State(gw): State<Arc<Gateway>>) -> Response {
    let stats = gw.stats();
    let reduction = stats.actual_reduction_pct();
    let mut value = serde_json::to_value(stats).expect("stats serialize");
    value["actual_reduction_pct"] = json!(reduction);
    Json(value).into_response()
}

async fn health_handler(State(gw): State<Arc<Gateway>>) -> Response {
    Json(json!({
        "status": "ok",
        "model": gw.model.kind(),
        "intents": gw.model.intent_ids(),
        "predicate": gw.predicate.name(&gw.schema),
    }))
    .into_response()
}

/// Runs the service until ctrl-c, then flushes the audit log.
pub async fn serve(gateway: Arc<Gateway>, listen: &str) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await.map_err(GateError::io(PathBuf::from(listen)))?;
    log::info!("listening on {}", listener.local_addr().map_err(GateError::io(PathBuf::from(listen)))?);
    axum::serve(listener, Arc::clone(&gateway).router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(GateError::io(PathBuf::from(listen)))?;
    gateway.flush_audit().await;
    Ok(())
}
