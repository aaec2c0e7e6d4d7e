use std::fmt;

use fairify_core::llm::LlmError;

pub const SUCCESS: i32 = 0;
pub const USAGE: i32 = 1;
pub const DATA: i32 = 2;
pub const BACKEND: i32 = 3;

/// An error tagged with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self { code: USAGE, error: error.into() }
    }

    pub fn data(error: impl Into<anyhow::Error>) -> Self {
        Self { code: DATA, error: error.into() }
    }

    pub fn backend(error: impl Into<anyhow::Error>) -> Self {
        Self { code: BACKEND, error: error.into() }
    }

    /// Configuration problems are usage errors, everything else the backend's fault.
    pub fn from_llm(error: LlmError) -> Self {
        match error {
            LlmError::Config(_) | LlmError::MissingTemplate => Self::usage(error),
            LlmError::Cassette(_) => Self::data(error),
            _ => Self::backend(error),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

/// Attach an exit code (and optional context) to any error.
pub trait Tag<T> {
    fn or_usage(self, context: impl fmt::Display) -> CmdResult<T>;
    fn or_data(self, context: impl fmt::Display) -> CmdResult<T>;
}

impl<T, E> Tag<T> for Result<T, E>
where
    E: Into<anyhow::Error>,
{
    fn or_usage(self, context: impl fmt::Display) -> CmdResult<T> {
        self.map_err(|e| Failure::usage(e.into().context(context.to_string())))
    }

    fn or_data(self, context: impl fmt::Display) -> CmdResult<T> {
        self.map_err(|e| Failure::data(e.into().context(context.to_string())))
    }
}
