mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::http::StatusCode;
use axum::routing::post;
use axum::Router;
use convo_gate::corpus::CorpusCodec;
use convo_gate::gateway::audit::replay_audit;
use convo_gate::gateway::{decide_snippet, Decision, FilterDecision, Gateway, GatewayConfig, GatewayStats};
use convo_gate_core::filter::{Predicate, SegmentationConfig};
use convo_gate_core::rng::SplitMix64;
use convo_gate_core::tokens::WhitespaceCounter;
use convo_gate_core::{Conversation, IntentSchema, Turn};
use serde_json::Value;

struct Downstream {
    calls: Arc<AtomicUsize>,
    url: String,
}

async fn downstream(status: u16) -> Downstream {
    let calls = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&calls);
    let app = Router::new().route(
        "/sink",
        post(move |headers: axum::http::HeaderMap, body: String| {
            let counter = Arc::clone(&counter);
            async move {
                counter.fetch_add(1, Ordering::SeqCst);
                assert_eq!(headers["x-convo-gate-decision"], "forward");
                assert!(serde_json::from_str::<Value>(&body).is_ok());
                (StatusCode::from_u16(status).unwrap(), r#"{"ok":true}"#)
            }
        }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let url = format!("http://{}/sink", listener.local_addr().unwrap());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    Downstream { calls, url }
}

async fn start(cfg: GatewayConfig, seg: SegmentationConfig) -> (Arc<Gateway>, String) {
    let gw = Arc::new(
        Gateway::new(Arc::new(common::keyword_model()), IntentSchema::default_schema(), &cfg, seg).await.unwrap(),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let router = Arc::clone(&gw).router();
    tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
    (gw, base)
}

fn body(conv: &Conversation) -> String {
    CorpusCodec::new(&IntentSchema::default_schema()).encode(conv).unwrap()
}

fn closure_holds(s: &GatewayStats) {
    assert_eq!(s.forwarded_tokens + s.filtered_tokens, s.total_tokens);
    assert_eq!(s.forwarded_snippets + s.filtered_snippets, s.total_snippets);
}

#[tokio::test(flavor = "multi_thread")]
async fn fresh_service_reports_zero() {
    let (_, base) = start(GatewayConfig::default(), SegmentationConfig::default()).await;
    let client = reqwest::Client::new();
    let stats: Value = client.get(format!("{base}/v1/stats")).send().await.unwrap().json().await.unwrap();
    assert_eq!(stats["total_snippets"], 0);
    assert_eq!(stats["total_tokens"], 0);
    assert!(stats["actual_reduction_pct"].is_null());
    let health: Value = client.get(format!("{base}/healthz")).send().await.unwrap().json().await.unwrap();
    assert_eq!(health["status"], "ok");
    assert_eq!(health["predicate"], "any");
}

#[tokio::test(flavor = "multi_thread")]
async fn filtered_snippets_never_reach_downstream() {
    let sink = downstream(200).await;
    let cfg = GatewayConfig { downstream: Some(sink.url.clone()), ..Default::default() };
    let (gw, base) = start(cfg, SegmentationConfig::default()).await;
    let client = reqwest::Client::new();
    let mut rng = SplitMix64::new(3);
    let mut forwarded = 0;
    for i in 0..10 {
        let snippet = common::snippet(&format!("s{i}"), &mut rng);
        let resp = client.post(format!("{base}/v1/filter")).body(body(&snippet)).send().await.unwrap();
        assert_eq!(resp.status(), 200);
        let v: Value = resp.json().await.unwrap();
        let d: FilterDecision = serde_json::from_value(v["decision"].clone()).unwrap();
        let (_, offline) = decide_snippet(
            &common::keyword_model(),
            &snippet,
            gw.segmentation(),
            &WhitespaceCounter,
            gw.thresholds(),
            Predicate::Any,
        )
        .unwrap();
        assert_eq!(d.decision == Decision::Forward, offline);
        if offline {
            forwarded += 1;
            assert_eq!(v["downstream"]["status"], 200);
        } else {
            assert!(v["downstream"].is_null());
        }
    }
    assert!(forwarded > 0 && forwarded < 10, "sample should mix both outcomes, got {forwarded}");
    assert_eq!(sink.calls.load(Ordering::SeqCst), forwarded);
    let s = gw.stats();
    assert_eq!(s.total_snippets, 10);
    assert_eq!(s.forwarded_snippets, forwarded as u64);
    closure_holds(&s);
}

#[tokio::test(flavor = "multi_thread")]
async fn downstream_failure_yields_an_error_record() {
    let sink = downstream(500).await;
    let cfg = GatewayConfig { downstream: Some(sink.url.clone()), ..Default::default() };
    let (gw, base) = start(cfg, SegmentationConfig::default()).await;
    let snippet = Conversation::new("fwd", "live", vec![Turn::new("a", "please remind me tomorrow")]);
    let resp = reqwest::Client::new().post(format!("{base}/v1/filter")).body(body(&snippet)).send().await.unwrap();
    assert_eq!(resp.status(), 502);
    let v: Value = resp.json().await.unwrap();
    assert_eq!(v["error"]["snippet_id"], "fwd");
    assert_eq!(v["decision"]["decision"], "forward");
    assert_eq!(sink.calls.load(Ordering::SeqCst), 1);
    let s = gw.stats();
    assert_eq!(s.delivery_failures, 1);
    assert_eq!(s.forwarded_snippets, 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn malformed_snippets_are_bad_requests() {
    let (gw, base) = start(GatewayConfig::default(), SegmentationConfig::default()).await;
    let client = reqwest::Client::new();
    for bad in ["not json", "[]", r#"{"turns":[]}"#, r#"{"turns":[{"speaker":"a"}]}"#] {
        let resp = client.post(format!("{base}/v1/classify")).body(bad).send().await.unwrap();
        assert_eq!(resp.status(), 400, "{bad}");
    }
    let resp = client
        .post(format!("{base}/v1/classify"))
        .body(r#"{"turns":[{"speaker":"a","text":"what time?"}]}"#)
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 200);
    let d: FilterDecision = resp.json().await.unwrap();
    assert!(d.snippet_id.starts_with("snippet-"));
    assert_eq!(d.matched_intents, vec!["information-seeking".to_string()]);
    assert_eq!(gw.stats().total_snippets, 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn over_budget_snippet_forwards_on_any_positive_chunk() {
    let seg = SegmentationConfig { context_budget: 8, ..Default::default() };
    let (gw, _) = start(GatewayConfig::default(), seg).await;
    let mut turns: Vec<Turn> = (0..6).map(|i| Turn::new("a", format!("just chatting about stuff {i}"))).collect();
    turns.push(Turn::new("b", "please remind me"));
    let snippet = Conversation::new("long", "live", turns);
    let d = gw.classify(&snippet);
    assert!(d.chunks > 1);
    assert_eq!(d.decision, Decision::Forward);
    assert_eq!(d.matched_intents, vec!["action-triggering".to_string()]);
    let last = gw.classify(&Conversation::new("tail", "live", vec![Turn::new("b", "please remind me")]));
    assert_eq!(d.scores["action-triggering"], last.scores["action-triggering"]);
}

#[tokio::test(flavor = "multi_thread")]
async fn classification_errors_fail_closed_unless_configured() {
    let empty = Conversation::new("empty", "live", vec![]);
    let (closed, _) = start(GatewayConfig::default(), SegmentationConfig::default()).await;
    let d = closed.classify(&empty);
    assert!(d.errored && d.error.is_some());
    assert_eq!(d.decision, Decision::Filter);
    let (open, _) = start(GatewayConfig { fail_open: true, ..Default::default() }, SegmentationConfig::default()).await;
    assert_eq!(open.classify(&empty).decision, Decision::Forward);
    assert_eq!(open.stats().errored_snippets, 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn audit_replay_is_clean_and_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("audit/decisions.jsonl");
    let cfg =
        GatewayConfig { audit_log: Some(log.clone()), predicate: "action-triggering".into(), ..Default::default() };
    let (gw, base) = start(cfg, SegmentationConfig::default()).await;
    let client = reqwest::Client::new();
    let mut rng = SplitMix64::new(11);
    for i in 0..40 {
        let snippet = common::snippet(&format!("s{i}"), &mut rng);
        client.post(format!("{base}/v1/classify")).body(body(&snippet)).send().await.unwrap();
    }
    gw.flush_audit().await;
    let schema = IntentSchema::default_schema();
    let first = replay_audit(&log, &schema, gw.thresholds(), gw.predicate(), false).unwrap();
    let second = replay_audit(&log, &schema, gw.thresholds(), gw.predicate(), false).unwrap();
    assert_eq!(first, second);
    assert_eq!(first.records, 40);
    assert!(first.violations.is_empty());
    let s = gw.stats();
    assert_eq!(
        (first.total_tokens, first.forwarded_tokens, first.filtered_tokens),
        (s.total_tokens, s.forwarded_tokens, s.filtered_tokens)
    );

    // a tampered record shows up as a violation
    let text = std::fs::read_to_string(&log).unwrap();
    let line = text.lines().find(|l| l.contains(r#""decision":"filter""#)).unwrap();
    std::fs::write(&log, text.replacen(line, &line.replace(r#""decision":"filter""#, r#""decision":"forward""#), 1))
        .unwrap();
    let tampered = replay_audit(&log, &schema, gw.thresholds(), gw.predicate(), false).unwrap();
    assert_eq!(tampered.violations.len(), 1);
}
