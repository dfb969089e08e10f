use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use convo_gate::teacher_http::{label_corpus, HttpTeacher, TeacherConfig};
use convo_gate_core::teacher::{label_turns, PromptTemplates, TeacherError};
use convo_gate_core::{Conversation, IntentSchema, Turn};
use serde_json::{json, Value};

#[derive(Default)]
struct Mock {
    calls: AtomicUsize,
    /// Calls that fail with a 500 before the mock starts answering.
    failures: usize,
    status: Option<u16>,
}

/// Answers like a chat-completions endpoint with the keyword rule applied to
/// the numbered turns found in the prompt.
async fn complete(State(mock): State<Arc<Mock>>, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    let n = mock.calls.fetch_add(1, Ordering::SeqCst);
    if let Some(code) = mock.status {
        return (StatusCode::from_u16(code).unwrap(), Json(json!({"error": "nope"})));
    }
    if n < mock.failures {
        return (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({"error": "flaky"})));
    }
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.0);
    let prompt = body["messages"].as_array().unwrap().last().unwrap()["content"].as_str().unwrap().to_string();
    let action_definition = IntentSchema::default_schema().intents()[0].definition.clone();
    let action = prompt.contains(action_definition.as_str());
    let mut labels = String::from("<labels>\n");
    for line in prompt.lines() {
        let Some((idx, rest)) = line.strip_prefix('[').and_then(|l| l.split_once("] ")) else { continue };
        let Ok(idx) = idx.parse::<usize>() else { continue };
        let text = rest.split_once(": ").map_or(rest, |(_, t)| t);
        let hit = if action { text.contains("remind") } else { text.contains('?') };
        labels.push_str(&format!("T{idx} | {} | because\n", u8::from(hit)));
    }
    labels.push_str("</labels>");
    (StatusCode::OK, Json(json!({"choices": [{"message": {"role": "assistant", "content": labels}}]})))
}

/// Starts the mock on its own runtime thread and returns its URL.
fn start(mock: Arc<Mock>) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            let app = Router::new().route("/v1/chat/completions", post(complete)).with_state(mock);
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}/v1/chat/completions", rx.recv().unwrap())
}

fn config(endpoint: String) -> TeacherConfig {
    TeacherConfig { endpoint, model: "test-model".into(), backoff_ms: 1, max_retries: 2, ..Default::default() }
}

fn conv(id: &str) -> Conversation {
    Conversation::new(
        id,
        "d",
        vec![Turn::new("a", "please remind me at noon"), Turn::new("b", "sure"), Turn::new("a", "where is it?")],
    )
}

#[test]
fn labels_through_http_after_a_transient_failure() {
    let mock = Arc::new(Mock { failures: 1, ..Default::default() });
    let teacher = HttpTeacher::with_key(config(start(Arc::clone(&mock))), Some("k".into())).unwrap();
    let schema = IntentSchema::default_schema();
    let ann = label_turns(&conv("x"), &schema, &teacher).unwrap();
    // one retried call plus one call per intent
    assert_eq!(mock.calls.load(Ordering::SeqCst), 3);
    let bits: Vec<Vec<u8>> = ann.iter().map(|a| a.labels.to_bits()).collect();
    assert_eq!(bits, vec![vec![1, 0], vec![0, 0], vec![0, 1]]);
}

#[test]
fn client_errors_are_not_retried() {
    let mock = Arc::new(Mock { status: Some(400), ..Default::default() });
    let teacher = HttpTeacher::with_key(config(start(Arc::clone(&mock))), None).unwrap();
    let err = label_turns(&conv("x"), &IntentSchema::default_schema(), &teacher).unwrap_err();
    assert!(matches!(err, TeacherError::Transport(_)));
    assert_eq!(mock.calls.load(Ordering::SeqCst), 1);
}

#[test]
fn server_errors_give_up_after_the_retry_budget() {
    let mock = Arc::new(Mock { status: Some(503), ..Default::default() });
    let teacher = HttpTeacher::with_key(config(start(Arc::clone(&mock))), None).unwrap();
    assert!(label_turns(&conv("x"), &IntentSchema::default_schema(), &teacher).is_err());
    assert_eq!(mock.calls.load(Ordering::SeqCst), 3);
}

#[test]
fn concurrent_labeling_keeps_input_order() {
    let mock = Arc::new(Mock::default());
    let teacher = HttpTeacher::with_key(config(start(Arc::clone(&mock))), None).unwrap();
    let schema = IntentSchema::default_schema();
    let convs: Vec<Conversation> = (0..12).map(|i| conv(&format!("c{i}"))).collect();
    let out = label_corpus(convs, &schema, &teacher, &PromptTemplates::default(), 4).unwrap();
    assert_eq!(
        out.iter().map(|c| c.id.as_str()).collect::<Vec<_>>(),
        (0..12).map(|i| format!("c{i}")).collect::<Vec<_>>()
    );
    for c in &out {
        assert_eq!(c.labels.as_ref().unwrap().to_bits(), vec![1, 1]);
    }
    assert_eq!(mock.calls.load(Ordering::SeqCst), 24);
}
