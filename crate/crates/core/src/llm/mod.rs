//! Model-driven record correction: prompt construction, backends, cassettes
//! and reply parsing.

mod backend;
mod cassette;
mod correct;
mod parse;
mod prompt;
mod surrogate;

use thiserror::Error;

pub use backend::{
    BackendConfig, BackendKind, CompletionBackend, HttpBackend, RecordingBackend, ReplayBackend, SharedCassette,
    DEFAULT_API_KEY_ENV,
};
pub use cassette::{Cassette, CassetteEntry};
pub use correct::{correct_corpus, CorrectionOutcome, RecordFailure};
pub use parse::parse_llm_record;
pub use prompt::{
    build_prompt, fingerprint, CompletionRequest, PromptSetting, RequestParams, DEFAULT_MODEL, LLM_CEDAR_INSTRUCTION,
    LLM_INSTRUCTION, SYSTEM_TEXT,
};
pub use surrogate::{AliasTable, EchoSurrogate, TemplateFillSurrogate};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("the template-aware setting needs a template")]
    MissingTemplate,
    #[error("network error: {0}")]
    Network(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("http status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("no cassette entry for request {0}")]
    CassetteMiss(String),
    #[error("cassette: {0}")]
    Cassette(String),
    #[error("no fields could be read from the reply for `{0}`")]
    Unparseable(String),
    #[error("configuration: {0}")]
    Config(String),
}

impl LlmError {
    /// Stable short label, used in failure logs.
    pub fn kind(&self) -> &'static str {
        match self {
            LlmError::MissingTemplate => "missing_template",
            LlmError::Network(_) => "network",
            LlmError::RateLimited(_) => "rate_limited",
            LlmError::Auth(_) => "auth",
            LlmError::Http { .. } => "http",
            LlmError::BadResponse(_) => "bad_response",
            LlmError::CassetteMiss(_) => "cassette_miss",
            LlmError::Cassette(_) => "cassette",
            LlmError::Unparseable(_) => "unparseable",
            LlmError::Config(_) => "config",
        }
    }
}
