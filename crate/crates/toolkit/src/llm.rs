//! Chat-completion backends: an HTTP client with a content-addressed
//! response cache and retry policy, and a lookup-only mock.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use attrclause_core::prompts::{ChatBackend, ChatMessage, ChatRole};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";
pub const DEFAULT_AUTH_VAR: &str = "LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint_url: String,
    pub model_id: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_token_source: String,
    pub temperature: f64,
    pub timeout_ms: u64,
    pub max_retries: u32,
    /// No network access at all; only cached responses are served.
    pub offline: bool,
    /// Upper bound on concurrent requests for batch runs.
    pub parallelism: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint_url: DEFAULT_ENDPOINT.to_string(),
            model_id: DEFAULT_MODEL.to_string(),
            auth_token_source: DEFAULT_AUTH_VAR.to_string(),
            temperature: 0.0,
            timeout_ms: 60_000,
            max_retries: 3,
            offline: true,
            parallelism: 4,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::Config(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.timeout_ms == 0 {
            return Err(LlmError::Config("timeout_ms must be positive".into()));
        }
        if self.parallelism == 0 {
            return Err(LlmError::Config("parallelism must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("offline and no cached response for {cache_key}")]
    OfflineMiss { cache_key: String },
    #[error("environment variable {var} is not set")]
    AuthMissing { var: String },
    #[error("backend error (status {}): {body}", status.map_or("none".to_string(), |s| s.to_string()))]
    BackendError { status: Option<u16>, body: String },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("response cache: {0}")]
    Cache(String),
    #[error("no mock fixture for prompt {prompt:?}{}", nearest.as_ref().map(|n| format!("; nearest key: {n:?}")).unwrap_or_default())]
    FixtureMiss { prompt: String, nearest: Option<String> },
}

/// One request/response pair as stored in the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub model_id: String,
    pub temperature: f64,
    pub request_messages: Vec<ChatMessage>,
    pub response_text: String,
    pub cache_key: String,
}

impl ChatExchange {
    pub fn new(model_id: &str, temperature: f64, messages: Vec<ChatMessage>, response_text: String) -> Self {
        Self {
            cache_key: cache_key(model_id, temperature, &messages),
            model_id: model_id.to_string(),
            temperature,
            request_messages: messages,
            response_text,
        }
    }
}

/// SHA-256 (hex) over the canonical JSON of model, temperature and messages.
pub fn cache_key(model_id: &str, temperature: f64, messages: &[ChatMessage]) -> String {
    // serde_json's default map keeps keys sorted, which makes this canonical.
    let canonical = json!({
        "model_id": model_id,
        "temperature": temperature,
        "messages": messages,
    });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

/// Directory of exchanges, one file per cache key.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| LlmError::Cache(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn load(&self, key: &str) -> Result<Option<ChatExchange>, LlmError> {
        let path = self.dir.join(key);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(LlmError::Cache(format!("{}: {e}", path.display()))),
        };
        let ex: ChatExchange =
            serde_json::from_str(&text).map_err(|e| LlmError::Cache(format!("{}: {e}", path.display())))?;
        if ex.cache_key != key {
            return Err(LlmError::Cache(format!("{}: key mismatch", path.display())));
        }
        Ok(Some(ex))
    }

    /// Writes to a temporary file in the cache directory, then renames it
    /// into place.
    pub fn store(&self, ex: &ChatExchange) -> Result<(), LlmError> {
        let err = |e: &dyn std::fmt::Display| LlmError::Cache(e.to_string());
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| err(&e))?;
        let body = serde_json::to_string_pretty(ex).map_err(|e| err(&e))?;
        tmp.write_all(body.as_bytes()).map_err(|e| err(&e))?;
        tmp.as_file().sync_all().map_err(|e| err(&e))?;
        tmp.persist(self.dir.join(&ex.cache_key)).map_err(|e| err(&e.error))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Network layer under [`LlmClient`]. `Err` means no HTTP response arrived.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: &str,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<HttpResponse, String>;
}

#[derive(Debug, Default)]
pub struct UreqTransport;

impl Transport for UreqTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: &str,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<HttpResponse, String> {
        let req = ureq::post(url).timeout(timeout).set("Authorization", &format!("Bearer {bearer}"));
        match req.send_json(body.clone()) {
            Ok(resp) => {
                let status = resp.status();
                Ok(HttpResponse { status, body: resp.into_string().map_err(|e| e.to_string())? })
            }
            Err(ureq::Error::Status(status, resp)) => {
                Ok(HttpResponse { status, body: resp.into_string().unwrap_or_default() })
            }
            Err(e) => Err(e.to_string()),
        }
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Default)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Exponential backoff: `base * 2^attempt`, capped at `max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub max: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { base: Duration::from_millis(500), max: Duration::from_secs(30) }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.min(31)).unwrap_or(u32::MAX);
        self.base.saturating_mul(factor).min(self.max)
    }
}

fn is_transient(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

type EnvLookup = Box<dyn Fn(&str) -> Option<String> + Send + Sync>;

/// Cached, retrying chat-completion client.
pub struct LlmClient {
    config: BackendConfig,
    cache: Option<ResponseCache>,
    transport: Box<dyn Transport>,
    sleeper: Box<dyn Sleeper>,
    retry: RetryPolicy,
    env: EnvLookup,
    network_calls: AtomicUsize,
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmClient").field("config", &self.config).field("cache", &self.cache).finish()
    }
}

impl LlmClient {
    pub fn new(config: BackendConfig, cache: Option<ResponseCache>) -> Result<Self, LlmError> {
        config.validate()?;
        Ok(Self {
            config,
            cache,
            transport: Box::new(UreqTransport),
            sleeper: Box::new(ThreadSleeper),
            retry: RetryPolicy::default(),
            env: Box::new(|k| std::env::var(k).ok()),
            network_calls: AtomicUsize::new(0),
        })
    }

    pub fn with_transport(mut self, t: impl Transport + 'static) -> Self {
        self.transport = Box::new(t);
        self
    }

    pub fn with_sleeper(mut self, s: impl Sleeper + 'static) -> Self {
        self.sleeper = Box::new(s);
        self
    }

    pub fn with_retry(mut self, r: RetryPolicy) -> Self {
        self.retry = r;
        self
    }

    /// Replaces environment lookup, for tests.
    pub fn with_env(mut self, f: impl Fn(&str) -> Option<String> + Send + Sync + 'static) -> Self {
        self.env = Box::new(f);
        self
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    /// Requests handed to the transport so far, retries included.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        match messages.last() {
            None => return Err(LlmError::InvalidRequest("no messages".into())),
            Some(m) if m.role != ChatRole::User => {
                return Err(LlmError::InvalidRequest("last message must come from the user".into()))
            }
            Some(_) => {}
        }
        let key = cache_key(&self.config.model_id, self.config.temperature, messages);
        if let Some(cache) = &self.cache {
            if let Some(ex) = cache.load(&key)? {
                log::debug!("cache hit {key}");
                return Ok(ex.response_text);
            }
        }
        if self.config.offline {
            return Err(LlmError::OfflineMiss { cache_key: key });
        }
        let var = &self.config.auth_token_source;
        let token = (self.env)(var)
            .filter(|t| !t.is_empty())
            .ok_or_else(|| LlmError::AuthMissing { var: var.clone() })?;

        let text = self.request(&token, messages)?;
        if let Some(cache) = &self.cache {
            cache.store(&ChatExchange::new(
                &self.config.model_id,
                self.config.temperature,
                messages.to_vec(),
                text.clone(),
            ))?;
        }
        Ok(text)
    }

    fn request(&self, token: &str, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let body = json!({
            "model": self.config.model_id,
            "temperature": self.config.temperature,
            "messages": messages,
        });
        let timeout = Duration::from_millis(self.config.timeout_ms);
        let mut attempt = 0u32;
        loop {
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            let failure = match self.transport.post_json(&self.config.endpoint_url, token, &body, timeout) {
                Ok(resp) if (200..300).contains(&resp.status) => return extract_content(&resp.body),
                Ok(resp) if !is_transient(resp.status) => {
                    return Err(LlmError::BackendError { status: Some(resp.status), body: resp.body })
                }
                Ok(resp) => LlmError::BackendError { status: Some(resp.status), body: resp.body },
                Err(e) => LlmError::BackendError { status: None, body: e },
            };
            if attempt >= self.config.max_retries {
                return Err(failure);
            }
            let delay = self.retry.delay(attempt);
            log::warn!("transient failure ({failure}); retry {} in {delay:?}", attempt + 1);
            self.sleeper.sleep(delay);
            attempt += 1;
        }
    }
}

fn extract_content(body: &str) -> Result<String, LlmError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| LlmError::MalformedResponse("missing choices[0].message.content".into()))
}

impl ChatBackend for LlmClient {
    type Error = LlmError;

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        LlmClient::complete(self, messages)
    }
}

/// A printed prompt/response pair used as a mock fixture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockExchange {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub prompt: String,
    pub response: String,
}

/// Lookup-only backend keyed by the exact prompt text of the last message.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    by_prompt: BTreeMap<String, String>,
}

impl MockBackend {
    /// Later duplicates of a prompt replace earlier ones.
    pub fn new(fixtures: impl IntoIterator<Item = (String, String)>) -> Self {
        Self { by_prompt: fixtures.into_iter().collect() }
    }

    pub fn from_exchanges(exchanges: impl IntoIterator<Item = MockExchange>) -> Self {
        Self::new(exchanges.into_iter().map(|e| (e.prompt, e.response)))
    }

    pub fn from_json(src: &str) -> Result<Self, serde_json::Error> {
        let ex: Vec<MockExchange> = serde_json::from_str(src)?;
        Ok(Self::from_exchanges(ex))
    }

    pub fn len(&self) -> usize {
        self.by_prompt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_prompt.is_empty()
    }

    fn nearest(&self, prompt: &str) -> Option<String> {
        self.by_prompt
            .keys()
            .min_by_key(|k| strsim::levenshtein(k, prompt))
            .cloned()
    }
}

impl ChatBackend for MockBackend {
    type Error = LlmError;

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let prompt = messages
            .last()
            .filter(|m| m.role == ChatRole::User)
            .ok_or_else(|| LlmError::InvalidRequest("last message must come from the user".into()))?;
        self.by_prompt.get(&prompt.content).cloned().ok_or_else(|| LlmError::FixtureMiss {
            prompt: prompt.content.clone(),
            nearest: self.nearest(&prompt.content),
        })
    }
}

/// Either backend behind one error type.
#[derive(Debug)]
pub enum AnyBackend {
    Mock(MockBackend),
    Http(LlmClient),
}

impl ChatBackend for AnyBackend {
    type Error = LlmError;

    fn complete(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        match self {
            Self::Mock(m) => m.complete(messages),
            Self::Http(c) => c.complete(messages),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::{Arc, Mutex};

    #[derive(Clone, Default)]
    struct Scripted {
        replies: Arc<Mutex<Vec<Result<HttpResponse, String>>>>,
        calls: Arc<AtomicUsize>,
    }

    impl Scripted {
        fn new(mut replies: Vec<Result<HttpResponse, String>>) -> Self {
            replies.reverse();
            Self { replies: Arc::new(Mutex::new(replies)), calls: Arc::default() }
        }
    }

    impl Transport for Scripted {
        fn post_json(&self, _: &str, _: &str, _: &serde_json::Value, _: Duration) -> Result<HttpResponse, String> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.replies.lock().unwrap().pop().unwrap_or_else(|| Err("script exhausted".into()))
        }
    }

    #[derive(Clone, Default)]
    struct Recorder(Arc<Mutex<Vec<Duration>>>);

    impl Sleeper for Recorder {
        fn sleep(&self, d: Duration) {
            self.0.lock().unwrap().push(d);
        }
    }

    fn ok(content: &str) -> Result<HttpResponse, String> {
        Ok(HttpResponse {
            status: 200,
            body: json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string(),
        })
    }

    fn status(code: u16) -> Result<HttpResponse, String> {
        Ok(HttpResponse { status: code, body: format!("status {code}") })
    }

    fn online(max_retries: u32) -> BackendConfig {
        BackendConfig { offline: false, max_retries, ..BackendConfig::default() }
    }

    fn client(cfg: BackendConfig, cache: Option<ResponseCache>, t: Scripted, s: Recorder) -> LlmClient {
        LlmClient::new(cfg, cache)
            .unwrap()
            .with_transport(t)
            .with_sleeper(s)
            .with_env(|_| Some("k".into()))
    }

    #[test]
    fn cache_key_is_hex_sha256_and_field_sensitive() {
        let m = vec![ChatMessage::user("a")];
        let k = cache_key("m", 0.0, &m);
        assert_eq!(k.len(), 64);
        assert!(k.chars().all(|c| c.is_ascii_hexdigit()));
        assert_eq!(k, cache_key("m", 0.0, &m));
        assert_ne!(k, cache_key("m2", 0.0, &m));
        assert_ne!(k, cache_key("m", 0.5, &m));
        assert_ne!(k, cache_key("m", 0.0, &[ChatMessage::user("b")]));
    }

    #[test]
    fn retries_transient_failures_then_succeeds() {
        let t = Scripted::new(vec![status(503), Err("reset".into()), status(429), ok("done")]);
        let s = Recorder::default();
        let c = client(online(3), None, t.clone(), s.clone());
        assert_eq!(c.complete(&[ChatMessage::user("x")]).unwrap(), "done");
        assert_eq!(t.calls.load(Ordering::SeqCst), 4);
        let delays = s.0.lock().unwrap().clone();
        assert_eq!(delays.len(), 3);
        assert!(delays.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn gives_up_after_max_retries() {
        let t = Scripted::new(vec![status(500); 10]);
        let s = Recorder::default();
        let c = client(online(2), None, t.clone(), s.clone());
        let err = c.complete(&[ChatMessage::user("x")]).unwrap_err();
        assert_eq!(err, LlmError::BackendError { status: Some(500), body: "status 500".into() });
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
        assert_eq!(s.0.lock().unwrap().len(), 2);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let t = Scripted::new(vec![status(401), ok("never")]);
        let c = client(online(5), None, t.clone(), Recorder::default());
        assert!(matches!(c.complete(&[ChatMessage::user("x")]), Err(LlmError::BackendError { status: Some(401), .. })));
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn online_without_token_is_auth_missing() {
        let c = LlmClient::new(online(0), None).unwrap().with_env(|_| None);
        assert_eq!(
            c.complete(&[ChatMessage::user("x")]),
            Err(LlmError::AuthMissing { var: DEFAULT_AUTH_VAR.into() })
        );
    }

    #[test]
    fn malformed_success_body() {
        let t = Scripted::new(vec![Ok(HttpResponse { status: 200, body: "{}".into() })]);
        let c = client(online(0), None, t, Recorder::default());
        assert!(matches!(c.complete(&[ChatMessage::user("x")]), Err(LlmError::MalformedResponse(_))));
    }

    #[test]
    fn request_must_end_with_user() {
        let c = LlmClient::new(BackendConfig::default(), None).unwrap();
        assert!(matches!(c.complete(&[]), Err(LlmError::InvalidRequest(_))));
        let sys = ChatMessage { role: ChatRole::System, content: "s".into() };
        assert!(matches!(c.complete(&[sys]), Err(LlmError::InvalidRequest(_))));
    }

    #[test]
    fn config_validation() {
        let bad = BackendConfig { temperature: 2.5, ..BackendConfig::default() };
        assert!(matches!(LlmClient::new(bad, None), Err(LlmError::Config(_))));
        let nan = BackendConfig { temperature: f64::NAN, ..BackendConfig::default() };
        assert!(nan.validate().is_err());
    }

    #[test]
    fn backoff_is_capped() {
        let p = RetryPolicy { base: Duration::from_millis(100), max: Duration::from_millis(350) };
        let d: Vec<_> = (0..40).map(|i| p.delay(i)).collect();
        assert_eq!(d[0], Duration::from_millis(100));
        assert_eq!(d[2], Duration::from_millis(350));
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn mock_miss_reports_nearest_key() {
        let m = MockBackend::new([("hello world".to_string(), "r".to_string())]);
        match m.complete(&[ChatMessage::user("hello word")]) {
            Err(LlmError::FixtureMiss { nearest, .. }) => assert_eq!(nearest.as_deref(), Some("hello world")),
            other => panic!("{other:?}"),
        }
        let empty = MockBackend::default();
        assert!(matches!(
            empty.complete(&[ChatMessage::user("x")]),
            Err(LlmError::FixtureMiss { nearest: None, .. })
        ));
    }

    #[test]
    fn mock_duplicate_key_last_write_wins() {
        let m = MockBackend::new([("p".to_string(), "1".to_string()), ("p".to_string(), "2".to_string())]);
        assert_eq!(m.len(), 1);
        assert_eq!(m.complete(&[ChatMessage::user("p")]).unwrap(), "2");
    }
}
