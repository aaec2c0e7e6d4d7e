use std::sync::{Arc, RwLock};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cassette::{Cassette, CassetteEntry};
use super::prompt::{CompletionRequest, RequestParams};
use super::LlmError;

pub const DEFAULT_API_KEY_ENV: &str = "FAIRIFY_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    #[default]
    Replay,
    SurrogateEcho,
    SurrogateTemplateFill,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "http" => Ok(BackendKind::Http),
            "replay" => Ok(BackendKind::Replay),
            "surrogate_echo" => Ok(BackendKind::SurrogateEcho),
            "surrogate_template_fill" => Ok(BackendKind::SurrogateTemplateFill),
            other => Err(format!(
                "unknown backend `{other}` (expected http|replay|surrogate_echo|surrogate_template_fill)"
            )),
        }
    }
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackendKind::Http => "http",
            BackendKind::Replay => "replay",
            BackendKind::SurrogateEcho => "surrogate_echo",
            BackendKind::SurrogateTemplateFill => "surrogate_template_fill",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint_url: Option<String>,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub max_in_flight: usize,
    pub params: RequestParams,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::default(),
            endpoint_url: None,
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            timeout: Duration::from_secs(60),
            max_retries: 5,
            backoff_base: Duration::from_millis(500),
            max_in_flight: 4,
            params: RequestParams::default(),
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.max_in_flight == 0 {
            return Err(LlmError::Config("max_in_flight must be at least 1".into()));
        }
        if !self.params.temperature.is_finite() || self.params.temperature < 0.0 {
            return Err(LlmError::Config("temperature must be a non-negative number".into()));
        }
        if self.params.model.trim().is_empty() {
            return Err(LlmError::Config("model must not be empty".into()));
        }
        if self.kind == BackendKind::Http {
            match &self.endpoint_url {
                None => return Err(LlmError::Config("http backend needs an endpoint url".into())),
                Some(u) if !(u.starts_with("http://") || u.starts_with("https://")) => {
                    return Err(LlmError::Config(format!("endpoint url `{u}` is not http(s)")))
                }
                _ => {}
            }
            if self.api_key_env.trim().is_empty() {
                return Err(LlmError::Config("api key variable name must not be empty".into()));
            }
        }
        Ok(())
    }
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

pub type SharedCassette = Arc<RwLock<Cassette>>;

/// Serves responses from a cassette; a missing fingerprint is an error.
pub struct ReplayBackend {
    cassette: SharedCassette,
}

impl ReplayBackend {
    pub fn new(cassette: SharedCassette) -> Self {
        Self { cassette }
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let cassette = self.cassette.read().expect("cassette lock poisoned");
        cassette
            .get(&request.request_fingerprint)
            .map(|e| e.response_text.clone())
            .ok_or_else(|| LlmError::CassetteMiss(request.request_fingerprint.clone()))
    }
}

/// Wraps a live backend and stores every successful exchange.
pub struct RecordingBackend<B> {
    inner: B,
    cassette: SharedCassette,
}

impl<B> RecordingBackend<B> {
    pub fn new(inner: B, cassette: SharedCassette) -> Self {
        Self { inner, cassette }
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let response = self.inner.complete(request)?;
        let entry = CassetteEntry {
            user_text: request.user_text.clone(),
            response_text: response.clone(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        self.cassette
            .write()
            .expect("cassette lock poisoned")
            .insert(request.request_fingerprint.clone(), entry);
        Ok(response)
    }
}

/// OpenAI-style chat-completions client with retry on rate limits and transport errors.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
    max_retries: u32,
    backoff_base: Duration,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.endpoint)
            .field("max_retries", &self.max_retries)
            .finish_non_exhaustive()
    }
}

enum Attempt {
    Done(String),
    Retry(LlmError, Option<Duration>),
}

impl HttpBackend {
    /// Reads the API key from the configured environment variable.
    pub fn from_config(config: &BackendConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| LlmError::Auth(format!("environment variable {} is not set", config.api_key_env)))?;
        Self::with_key(config, api_key)
    }

    pub fn with_key(config: &BackendConfig, api_key: String) -> Result<Self, LlmError> {
        let endpoint = config
            .endpoint_url
            .clone()
            .ok_or_else(|| LlmError::Config("http backend needs an endpoint url".into()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| LlmError::Config(format!("http client: {e}")))?;
        Ok(Self {
            client,
            endpoint,
            api_key,
            max_retries: config.max_retries,
            backoff_base: config.backoff_base,
        })
    }

    fn attempt(&self, request: &CompletionRequest) -> Result<Attempt, LlmError> {
        let body = serde_json::json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
        });
        let resp = match self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
        {
            Ok(r) => r,
            Err(e) => return Ok(Attempt::Retry(LlmError::Network(e.to_string()), None)),
        };
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Ok(Attempt::Retry(LlmError::Network(e.to_string()), None)),
        };
        match status {
            200..=299 => extract_content(&text).map(Attempt::Done),
            401 | 403 => Err(LlmError::Auth(format!("status {status}"))),
            429 => Ok(Attempt::Retry(LlmError::RateLimited(truncate(&text)), retry_after)),
            500..=599 => Ok(Attempt::Retry(
                LlmError::Network(format!("status {status}: {}", truncate(&text))),
                retry_after,
            )),
            _ => Err(LlmError::Http {
                status,
                body: truncate(&text),
            }),
        }
    }

    fn delay(&self, attempt: u32, hint: Option<Duration>) -> Duration {
        let exp = self.backoff_base.saturating_mul(1u32 << attempt.min(16));
        let jitter_ms = (exp.as_millis() / 2) as u64;
        let jitter = Duration::from_millis(if jitter_ms == 0 {
            0
        } else {
            rand::rng().random_range(0..=jitter_ms)
        });
        let d = exp + jitter;
        match hint {
            Some(h) if h > d => h.min(Duration::from_secs(120)),
            _ => d,
        }
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let mut attempt = 0;
        loop {
            match self.attempt(request)? {
                Attempt::Done(text) => return Ok(text),
                Attempt::Retry(err, hint) => {
                    if attempt >= self.max_retries {
                        return Err(err);
                    }
                    let wait = self.delay(attempt, hint);
                    log::warn!("request {} failed ({err}); retrying in {wait:?}", &request.request_fingerprint[..12]);
                    std::thread::sleep(wait);
                    attempt += 1;
                }
            }
        }
    }
}

fn truncate(s: &str) -> String {
    const MAX: usize = 300;
    match s.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

fn extract_content(body: &str) -> Result<String, LlmError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| LlmError::BadResponse(format!("invalid JSON: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| LlmError::BadResponse("missing choices[0].message.content".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Serves the canned (status, body) replies in order, one per connection.
    fn mock_server(replies: Vec<(u16, &'static str)>) -> (String, Arc<AtomicUsize>, std::thread::JoinHandle<()>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        let handle = std::thread::spawn(move || {
            for (status, body) in replies {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                let mut auth_ok = false;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let l = line.trim_end().to_ascii_lowercase();
                    if l.is_empty() {
                        break;
                    }
                    if let Some(v) = l.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if l == "authorization: bearer test-key" {
                        auth_ok = true;
                    }
                }
                let mut buf = vec![0u8; len];
                reader.read_exact(&mut buf).unwrap();
                let req: serde_json::Value = serde_json::from_slice(&buf).unwrap();
                assert_eq!(req["messages"][1]["role"], "user");
                assert!(auth_ok);
                counter.fetch_add(1, Ordering::SeqCst);
                let reply = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        (url, hits, handle)
    }

    fn config(url: String) -> BackendConfig {
        BackendConfig {
            kind: BackendKind::Http,
            endpoint_url: Some(url),
            max_retries: 2,
            backoff_base: Duration::from_millis(1),
            timeout: Duration::from_secs(5),
            ..Default::default()
        }
    }

    fn request() -> CompletionRequest {
        CompletionRequest::new("gpt-4", "sys", "user".into(), 0.0)
    }

    const OK: &str = r#"{"choices":[{"message":{"role":"assistant","content":"age: 67"}}]}"#;

    #[test]
    fn success_after_rate_limit() {
        let (url, hits, h) = mock_server(vec![(429, "{}"), (200, OK)]);
        let b = HttpBackend::with_key(&config(url), "test-key".into()).unwrap();
        assert_eq!(b.complete(&request()).unwrap(), "age: 67");
        h.join().unwrap();
        assert_eq!(hits.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn auth_failure_is_not_retried() {
        let (url, hits, h) = mock_server(vec![(401, "{}")]);
        let b = HttpBackend::with_key(&config(url), "test-key".into()).unwrap();
        assert!(matches!(b.complete(&request()), Err(LlmError::Auth(_))));
        h.join().unwrap();
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn retries_exhaust() {
        let (url, hits, h) = mock_server(vec![(429, "{}"), (503, "busy"), (429, "{}")]);
        let b = HttpBackend::with_key(&config(url), "test-key".into()).unwrap();
        assert!(matches!(b.complete(&request()), Err(LlmError::RateLimited(_))));
        h.join().unwrap();
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn malformed_body() {
        let (url, _, h) = mock_server(vec![(200, r#"{"choices":[]}"#)]);
        let b = HttpBackend::with_key(&config(url), "test-key".into()).unwrap();
        assert!(matches!(b.complete(&request()), Err(LlmError::BadResponse(_))));
        h.join().unwrap();
    }

    #[test]
    fn unreachable_is_network_error() {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let cfg = BackendConfig {
            max_retries: 1,
            ..config(format!("http://127.0.0.1:{port}/x"))
        };
        let b = HttpBackend::with_key(&cfg, "test-key".into()).unwrap();
        assert!(matches!(b.complete(&request()), Err(LlmError::Network(_))));
    }

    #[test]
    fn missing_key_variable() {
        let cfg = BackendConfig {
            api_key_env: "FAIRIFY_TEST_SURELY_UNSET_VARIABLE".into(),
            ..config("http://127.0.0.1:9/x".into())
        };
        assert!(matches!(HttpBackend::from_config(&cfg), Err(LlmError::Auth(_))));
    }

    #[test]
    fn validation() {
        assert!(BackendConfig::default().validate().is_ok());
        let http = BackendConfig {
            kind: BackendKind::Http,
            ..Default::default()
        };
        assert!(matches!(http.validate(), Err(LlmError::Config(_))));
        let zero = BackendConfig {
            max_in_flight: 0,
            ..Default::default()
        };
        assert!(zero.validate().is_err());
        assert_eq!("surrogate_template_fill".parse::<BackendKind>().unwrap(), BackendKind::SurrogateTemplateFill);
        assert!("gpt".parse::<BackendKind>().is_err());
    }

    #[test]
    fn replay_and_record() {
        struct Fixed;
        impl CompletionBackend for Fixed {
            fn complete(&self, _: &CompletionRequest) -> Result<String, LlmError> {
                Ok("sex: female".into())
            }
        }
        let cassette: SharedCassette = Arc::default();
        let replay = ReplayBackend::new(cassette.clone());
        let req = request();
        assert!(matches!(replay.complete(&req), Err(LlmError::CassetteMiss(_))));
        let rec = RecordingBackend::new(Fixed, cassette.clone());
        rec.complete(&req).unwrap();
        assert_eq!(replay.complete(&req).unwrap(), "sex: female");
        let c = cassette.read().unwrap();
        assert!(c.audit("gpt-4", "sys", 0.0).is_empty());
    }
}
