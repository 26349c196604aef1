//! Remote model endpoints over HTTP, the on-disk response cache, and the
//! registry that maps endpoint ids to model handles.
//!
//! Wire formats (all `POST`, JSON bodies):
//!
//! | kind      | request                                   | response                                   |
//! |-----------|-------------------------------------------|--------------------------------------------|
//! | CLASSIFY  | `{"inputs": [text, ...]}`                 | `{"probabilities": [..]}` or `{"logits": [..]}` |
//! | FILL_MASK | `{"text", "top_k"}` / `{"text", "targets"}` | `{"candidates": [{"token", "log_prob"}]}` / `{"scores": [..]}` |
//! | EMBED     | `{"text"}`                                | `{"embedding": [..]}`                      |
//! | CHAT      | OpenAI-style `{"model", "messages", "temperature"}` | `{"choices": [{"message": {"content"}}]}` |

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use testforge_core::model::{
    ChatModel, Classifier, ClassifyResult, Embedder, FillResult, MaskFiller, ModelError, SCORE_TOP_K,
};

use crate::mock::{HashEmbedder, HashFiller, LexiconClassifier, ScriptedChat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EndpointKind {
    Classify,
    FillMask,
    Embed,
    Chat,
}

fn default_timeout() -> u64 {
    60
}
fn default_concurrency() -> usize {
    4
}
fn default_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointSpec {
    pub id: String,
    pub kind: EndpointKind,
    pub url: String,
    /// Model name sent to chat endpoints.
    #[serde(default)]
    pub model: Option<String>,
    /// Environment variable holding a bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// Fill-mask endpoint accepts `targets` for direct token scoring.
    #[serde(default)]
    pub supports_targets: bool,
}

impl EndpointSpec {
    pub fn new(id: &str, kind: EndpointKind, url: &str) -> Self {
        EndpointSpec {
            id: id.into(),
            kind,
            url: url.into(),
            model: None,
            api_key_env: None,
            timeout_secs: default_timeout(),
            max_concurrency: default_concurrency(),
            max_retries: default_retries(),
            backoff_ms: default_backoff_ms(),
            supports_targets: false,
        }
    }
}

/// Content-addressed JSON response cache; entries are written atomically.
#[derive(Debug, Clone)]
pub struct DiskCache {
    dir: PathBuf,
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(DiskCache { dir })
    }

    pub fn key(endpoint: &EndpointSpec, body: &Value) -> String {
        let mut h = Sha256::new();
        for part in [endpoint.id.as_str(), endpoint.url.as_str(), endpoint.model.as_deref().unwrap_or("")] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        h.update(body.to_string().as_bytes());
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<Value> {
        let bytes = std::fs::read(self.path(key)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn put(&self, key: &str, value: &Value) -> std::io::Result<()> {
        let mut tmp = crate::store::temp_file_in(&self.dir)?;
        tmp.write_all(value.to_string().as_bytes())?;
        tmp.flush()?;
        tmp.persist(self.path(key)).map_err(|e| e.error)?;
        Ok(())
    }
}

/// Counting semaphore bounding in-flight requests per endpoint.
#[derive(Debug)]
struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// JSON-over-HTTP transport shared by all endpoint kinds.
pub struct HttpTransport {
    spec: EndpointSpec,
    agent: ureq::Agent,
    gate: Semaphore,
    cache: Option<DiskCache>,
}

impl HttpTransport {
    pub fn new(spec: EndpointSpec, cache: Option<DiskCache>) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(spec.timeout_secs)))
            .http_status_as_error(false)
            .build();
        HttpTransport { gate: Semaphore::new(spec.max_concurrency), agent: config.into(), spec, cache }
    }

    pub fn spec(&self) -> &EndpointSpec {
        &self.spec
    }

    /// POSTs `body`, retrying transport failures, 429 and 5xx with exponential backoff.
    pub fn post_json(&self, body: &Value) -> Result<Value, ModelError> {
        let key = self.cache.as_ref().map(|_| DiskCache::key(&self.spec, body));
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Some(hit) = cache.get(key) {
                return Ok(hit);
            }
        }
        let token = match &self.spec.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ModelError::Config(format!("environment variable {var} for endpoint {} is not set", self.spec.id))
            })?),
            None => None,
        };
        let payload = body.to_string();
        let mut last_err = String::new();
        for attempt in 0..=self.spec.max_retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.spec.backoff_ms << (attempt - 1)));
            }
            let _permit = self.gate.acquire();
            let mut req = self.agent.post(&self.spec.url).header("Content-Type", "application/json");
            if let Some(t) = &token {
                req = req.header("Authorization", &format!("Bearer {t}"));
            }
            match req.send(payload.as_str()) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.body_mut().read_to_string().unwrap_or_default();
                    if status == 429 || status >= 500 {
                        last_err = format!("HTTP {status}: {}", truncate(&text));
                        log::warn!("{} attempt {} failed: {last_err}", self.spec.id, attempt + 1);
                        continue;
                    }
                    if status >= 400 {
                        return Err(ModelError::model(&self.spec.id, format!("HTTP {status}: {}", truncate(&text))));
                    }
                    let value: Value = serde_json::from_str(&text)
                        .map_err(|e| ModelError::model(&self.spec.id, format!("invalid JSON response: {e}")))?;
                    if let (Some(cache), Some(key)) = (&self.cache, &key) {
                        if let Err(e) = cache.put(key, &value) {
                            log::warn!("cache write failed for {}: {e}", self.spec.id);
                        }
                    }
                    return Ok(value);
                }
                Err(e) => {
                    last_err = e.to_string();
                    log::warn!("{} attempt {} failed: {last_err}", self.spec.id, attempt + 1);
                }
            }
        }
        Err(ModelError::transport(&self.spec.id, last_err))
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(200).collect()
}

fn f64_list(v: &Value, field: &str, endpoint: &str) -> Result<Vec<f64>, ModelError> {
    v.get(field)
        .and_then(Value::as_array)
        .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
        .ok_or_else(|| ModelError::model(endpoint, format!("response lacks numeric list {field:?}")))
}

pub struct HttpClassifier(pub HttpTransport);

impl Classifier for HttpClassifier {
    fn id(&self) -> &str {
        &self.0.spec.id
    }

    fn classify(&self, texts: &[String]) -> Result<ClassifyResult, ModelError> {
        let v = self.0.post_json(&json!({ "inputs": texts }))?;
        if v.get("probabilities").is_some() {
            ClassifyResult::from_probabilities(f64_list(&v, "probabilities", self.id())?)
        } else {
            ClassifyResult::from_logits(&f64_list(&v, "logits", self.id())?)
        }
    }
}

pub struct HttpFiller(pub HttpTransport);

impl MaskFiller for HttpFiller {
    fn id(&self) -> &str {
        &self.0.spec.id
    }

    fn fill_mask(&self, text: &str, top_k: usize) -> Result<FillResult, ModelError> {
        testforge_core::model::require_single_mask(text)?;
        let v = self.0.post_json(&json!({ "text": text, "top_k": top_k }))?;
        let result: FillResult = serde_json::from_value(v)
            .map_err(|e| ModelError::model(self.id(), format!("bad fill-mask response: {e}")))?;
        result.validate()?;
        Ok(result)
    }

    fn score_tokens(&self, text: &str, tokens: &[&str]) -> Result<Vec<Option<f64>>, ModelError> {
        testforge_core::model::require_single_mask(text)?;
        if !self.0.spec.supports_targets {
            let fill = self.fill_mask(text, SCORE_TOP_K)?;
            return Ok(tokens.iter().map(|t| fill.log_prob_of(t)).collect());
        }
        let v = self.0.post_json(&json!({ "text": text, "targets": tokens }))?;
        let scores = v
            .get("scores")
            .and_then(Value::as_array)
            .ok_or_else(|| ModelError::model(self.id(), "response lacks \"scores\""))?;
        if scores.len() != tokens.len() {
            return Err(ModelError::model(self.id(), "one score per target is required"));
        }
        Ok(scores.iter().map(Value::as_f64).collect())
    }
}

pub struct HttpEmbedder(pub HttpTransport);

impl Embedder for HttpEmbedder {
    fn id(&self) -> &str {
        &self.0.spec.id
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ModelError> {
        let v = self.0.post_json(&json!({ "text": text }))?;
        f64_list(&v, "embedding", self.id())
    }
}

pub struct HttpChat {
    pub transport: Arc<HttpTransport>,
    pub temperature: f64,
}

impl ChatModel for HttpChat {
    fn id(&self) -> &str {
        &self.transport.spec.id
    }

    fn chat(&self, system: &str, user: &str) -> Result<String, ModelError> {
        let body = json!({
            "model": self.transport.spec.model.clone().unwrap_or_default(),
            "temperature": self.temperature,
            "messages": [
                { "role": "system", "content": system },
                { "role": "user", "content": user },
            ],
        });
        let v = self.transport.post_json(&body)?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| ModelError::model(self.id(), "response lacks choices[0].message.content"))
    }
}

/// Endpoint id to model handle, per role kind.
#[derive(Default, Clone)]
pub struct ModelRegistry {
    pub classifiers: BTreeMap<String, Arc<dyn Classifier>>,
    pub fillers: BTreeMap<String, Arc<dyn MaskFiller>>,
    pub embedders: BTreeMap<String, Arc<dyn Embedder>>,
    pub chats: BTreeMap<String, Arc<dyn ChatModel>>,
    /// Transports behind HTTP chat endpoints, so callers can pick a temperature.
    chat_transports: BTreeMap<String, Arc<HttpTransport>>,
}

fn lookup<T: ?Sized>(map: &BTreeMap<String, Arc<T>>, id: &str, kind: &str) -> Result<Arc<T>, ModelError> {
    map.get(id)
        .cloned()
        .ok_or_else(|| ModelError::Config(format!("no {kind} endpoint with id {id:?}")))
}

impl ModelRegistry {
    /// HTTP-backed registry; responses are cached under `cache_dir` when given.
    pub fn from_specs(specs: &[EndpointSpec], cache_dir: Option<&Path>) -> Result<Self, ModelError> {
        let cache = match cache_dir {
            Some(d) => Some(DiskCache::new(d).map_err(|e| ModelError::Config(format!("cache dir: {e}")))?),
            None => None,
        };
        let mut reg = ModelRegistry::default();
        for spec in specs {
            if reg.contains(&spec.id) {
                return Err(ModelError::Config(format!("duplicate endpoint id {:?}", spec.id)));
            }
            let t = HttpTransport::new(spec.clone(), cache.clone());
            let id = spec.id.clone();
            match spec.kind {
                EndpointKind::Classify => drop(reg.classifiers.insert(id, Arc::new(HttpClassifier(t)))),
                EndpointKind::FillMask => drop(reg.fillers.insert(id, Arc::new(HttpFiller(t)))),
                EndpointKind::Embed => drop(reg.embedders.insert(id, Arc::new(HttpEmbedder(t)))),
                EndpointKind::Chat => {
                    let t = Arc::new(t);
                    reg.chats.insert(id.clone(), Arc::new(HttpChat { transport: t.clone(), temperature: 0.0 }));
                    reg.chat_transports.insert(id, t);
                }
            }
        }
        Ok(reg)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.classifiers.contains_key(id)
            || self.fillers.contains_key(id)
            || self.embedders.contains_key(id)
            || self.chats.contains_key(id)
    }

    pub fn classifier(&self, id: &str) -> Result<Arc<dyn Classifier>, ModelError> {
        lookup(&self.classifiers, id, "CLASSIFY")
    }

    pub fn filler(&self, id: &str) -> Result<Arc<dyn MaskFiller>, ModelError> {
        lookup(&self.fillers, id, "FILL_MASK")
    }

    pub fn embedder(&self, id: &str) -> Result<Arc<dyn Embedder>, ModelError> {
        lookup(&self.embedders, id, "EMBED")
    }

    pub fn chat(&self, id: &str) -> Result<Arc<dyn ChatModel>, ModelError> {
        lookup(&self.chats, id, "CHAT")
    }

    /// Like [`chat`](Self::chat), sampling at `temperature`. In-process
    /// models have no sampling and are returned unchanged.
    pub fn chat_at(&self, id: &str, temperature: f64) -> Result<Arc<dyn ChatModel>, ModelError> {
        match self.chat_transports.get(id) {
            Some(t) => Ok(Arc::new(HttpChat { transport: t.clone(), temperature })),
            None => self.chat(id),
        }
    }
}

/// Ids of the models in [`mock_registry`].
pub mod mock_ids {
    pub const PANEL: [&str; 5] = ["mock-panel-1", "mock-panel-2", "mock-panel-3", "mock-panel-4", "mock-panel-5"];
    pub const SUBJECT: &str = "mock-subject";
    pub const CHAT: &str = "mock-chat";
    pub const FILL: &str = "mock-fill";
    pub const EMBED: &str = "mock-embed";
}

/// Fully offline registry of deterministic stand-ins.
pub fn mock_registry(seed: u64) -> ModelRegistry {
    let mut reg = ModelRegistry::default();
    for (k, id) in mock_ids::PANEL.iter().enumerate() {
        reg.classifiers.insert(id.to_string(), Arc::new(LexiconClassifier::variant(id, k)));
    }
    reg.classifiers
        .insert(mock_ids::SUBJECT.into(), Arc::new(LexiconClassifier::variant(mock_ids::SUBJECT, 5)));
    reg.chats.insert(mock_ids::CHAT.into(), Arc::new(ScriptedChat::new(mock_ids::CHAT, seed)));
    reg.fillers.insert(mock_ids::FILL.into(), Arc::new(HashFiller { id: mock_ids::FILL.into(), seed }));
    reg.embedders
        .insert(mock_ids::EMBED.into(), Arc::new(HashEmbedder { id: mock_ids::EMBED.into(), dims: 256 }));
    reg
}
