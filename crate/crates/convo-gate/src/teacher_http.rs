//! Chat-completion teacher over HTTP and concurrent corpus labeling.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use convo_gate_core::teacher::{
    apply_annotations, label_turns_with, ChatRequest, PromptTemplates, Teacher, TeacherError,
};
use convo_gate_core::{Conversation, IntentSchema};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub const KEY_ENV: &str = "CONVO_GATE_TEACHER_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeacherConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    pub max_retries: u32,
    pub timeout_secs: f64,
    /// Overrides the per-task temperature when set.
    pub temperature: Option<f64>,
    /// In-flight requests while labeling a corpus.
    pub concurrency: usize,
    pub backoff_ms: u64,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            max_retries: 3,
            timeout_secs: 60.0,
            temperature: None,
            concurrency: 4,
            backoff_ms: 500,
        }
    }
}

impl TeacherConfig {
    pub fn validate(&self) -> Result<(), TeacherError> {
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(TeacherError::Precondition("teacher.timeout_secs must be positive".into()));
        }
        if self.concurrency == 0 {
            return Err(TeacherError::Precondition("teacher.concurrency must be at least 1".into()));
        }
        Ok(())
    }
}

pub struct HttpTeacher {
    cfg: TeacherConfig,
    key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpTeacher {
    /// Reads the API key from `CONVO_GATE_TEACHER_KEY`; a missing key sends
    /// unauthenticated requests.
    pub fn new(cfg: TeacherConfig) -> Result<Self, TeacherError> {
        let key = std::env::var(KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::with_key(cfg, key)
    }

    pub fn with_key(cfg: TeacherConfig, key: Option<String>) -> Result<Self, TeacherError> {
        cfg.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| TeacherError::Transport(e.to_string()))?;
        Ok(Self { cfg, key, client })
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, (bool, TeacherError)> {
        let mut req = self.client.post(&self.cfg.endpoint).json(body);
        if let Some(key) = &self.key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| (true, TeacherError::Transport(e.to_string())))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| (true, TeacherError::Transport(e.to_string())))?;
        if !status.is_success() {
            let retry = status.is_server_error() || status.as_u16() == 429;
            return Err((retry, TeacherError::Transport(format!("HTTP {status}: {}", truncate(&text, 300)))));
        }
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| (false, TeacherError::parse(format!("response is not JSON: {e}"), &text)))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(String::from)
            .ok_or_else(|| (false, TeacherError::parse("no choices[0].message.content".into(), &text)))
    }
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

impl Teacher for HttpTeacher {
    fn complete(&self, request: &ChatRequest) -> Result<String, TeacherError> {
        let messages: Vec<_> =
            request.messages.iter().map(|m| json!({"role": m.role.as_str(), "content": m.content})).collect();
        let mut body = json!({
            "model": self.cfg.model,
            "messages": messages,
            "temperature": self.cfg.temperature.unwrap_or(request.temperature),
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(content) => return Ok(content),
                Err((retry, err)) if retry && attempt < self.cfg.max_retries => {
                    let wait = self.cfg.backoff_ms.saturating_mul(1 << attempt.min(16));
                    log::warn!("teacher request failed ({err}); retrying in {wait} ms");
                    std::thread::sleep(Duration::from_millis(wait));
                    attempt += 1;
                }
                Err((_, err)) => return Err(err),
            }
        }
    }
}

/// Labels every conversation with up to `concurrency` conversations in
/// flight. Results keep input order; the first error aborts the remaining
/// work and is returned.
pub fn label_corpus<T: Teacher + Sync + ?Sized>(
    convs: Vec<Conversation>,
    schema: &IntentSchema,
    teacher: &T,
    templates: &PromptTemplates,
    concurrency: usize,
) -> Result<Vec<Conversation>, (String, TeacherError)> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Conversation>>> = convs.into_iter().map(|c| Mutex::new(Some(c))).collect();
    let failure: Mutex<Option<(String, TeacherError)>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..concurrency.max(1).min(slots.len().max(1)) {
            scope.spawn(|| loop {
                if failure.lock().unwrap().is_some() {
                    return;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(slot) = slots.get(i) else { return };
                let mut conv = slot.lock().unwrap().take().expect("each slot is taken once");
                let result = label_turns_with(&conv, schema, teacher, templates).and_then(|ann| {
                    apply_annotations(&mut conv, &ann).map_err(|e| TeacherError::Precondition(e.to_string()))
                });
                match result {
                    Ok(()) => *slot.lock().unwrap() = Some(conv),
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert((conv.id.clone(), e));
                        return;
                    }
                }
            });
        }
    });
    if let Some(f) = failure.into_inner().unwrap() {
        return Err(f);
    }
    Ok(slots.into_iter().map(|s| s.into_inner().unwrap().expect("every slot labeled")).collect())
}
