//! Language-model access.
//!
//! Every call the engine makes goes through [`LanguageModel::complete`]. The
//! live client speaks the OpenAI-compatible chat-completions protocol; the
//! scripted backend answers from an ordered table of canned responses so that
//! whole lessons run offline and deterministically. Wrappers add retry,
//! record/replay and call instrumentation without changing the contract.

mod cassette;
mod http;
mod instrument;
mod retry;
mod scripted;

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cassette::{record_replay, CassetteMode, RecordReplay};
pub use http::{HttpBackend, HttpSettings, API_BASE_ENV, API_KEY_ENV};
pub use instrument::{CallRecord, Instrumented};
pub use retry::{with_retry, RetryPolicy};
pub use scripted::{Matcher, ScriptEntry, ScriptedBackend};

/// Tags attached to every engine-issued request, one per call role.
pub mod tags {
    pub const DISTILL_COT: &str = "distill_cot";
    pub const DISTILL_COA: &str = "distill_coa";
    pub const REFLECT: &str = "reflect";
    pub const PLAN: &str = "plan";
    pub const ACT: &str = "act";
    pub const WILLINGNESS: &str = "willingness";
    pub const SUPERVISOR: &str = "supervisor";
    pub const CONSISTENCY: &str = "consistency";
    pub const TEACHING_PLAN: &str = "teaching_plan";
    pub const CLASSIFY: &str = "classify";
    pub const PERSONA_PROBE: &str = "persona_probe";
    pub const FIAS_CODER: &str = "fias_coder";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Sampling parameters carried by a request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Sampling {
    /// Role agents speak with some variety.
    pub const ROLE: Sampling = Sampling {
        temperature: 0.7,
        max_tokens: 512,
    };
    /// General agents judge and score, so they run greedy.
    pub const GENERAL: Sampling = Sampling {
        temperature: 0.0,
        max_tokens: 256,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmRequest {
    pub system: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Instrumentation label; never part of the request digest.
    pub tag: String,
}

impl LmRequest {
    /// Single-turn request: one user message under a system preamble.
    pub fn single(
        tag: &str,
        system: impl Into<String>,
        prompt: impl Into<String>,
        sampling: Sampling,
    ) -> Self {
        Self {
            system: system.into(),
            messages: vec![Message::user(prompt)],
            temperature: sampling.temperature,
            max_tokens: sampling.max_tokens,
            tag: tag.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("messages are empty".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest(format!(
                "temperature must be finite and >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// The last message: what the request is asking.
    pub fn prompt(&self) -> &str {
        self.messages.last().map(|m| m.content.as_str()).unwrap_or("")
    }

    /// System text and every message joined by blank lines.
    pub fn full_text(&self) -> String {
        let mut parts = Vec::with_capacity(self.messages.len() + 1);
        if !self.system.is_empty() {
            parts.push(self.system.as_str());
        }
        parts.extend(self.messages.iter().map(|m| m.content.as_str()));
        parts.join("\n\n")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmResponse {
    pub text: String,
    pub usage: Usage,
    pub latency: Duration,
}

impl LmResponse {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            usage: Usage::default(),
            latency: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("network failure: {0}")]
    Network(String),
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response body: {0}")]
    MalformedBody(String),
    #[error("no script entry matches [{tag}] prompt: {prompt:?}")]
    NoMatch { tag: String, prompt: String },
    #[error("cassette has no entry for digest {0}")]
    ReplayMiss(String),
    #[error("cassette: {0}")]
    Cassette(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    /// Network failures, 429 and 5xx are worth another attempt.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Network(_) => true,
            BackendError::Status { status, .. } => *status == 429 || (500..600).contains(status),
            _ => false,
        }
    }
}

#[async_trait]
pub trait LanguageModel: Send + Sync {
    async fn complete(&self, request: &LmRequest) -> Result<LmResponse, BackendError>;
}

/// Shared handle to a backend.
pub type Backend = Arc<dyn LanguageModel>;

#[async_trait]
impl<T: LanguageModel + ?Sized> LanguageModel for Arc<T> {
    async fn complete(&self, request: &LmRequest) -> Result<LmResponse, BackendError> {
        (**self).complete(request).await
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_validation() {
        let mut req = LmRequest::single("t", "", "hi", Sampling::GENERAL);
        assert!(req.validate().is_ok());
        req.temperature = f64::NAN;
        assert!(req.validate().is_err());
        req.temperature = 0.0;
        req.messages.clear();
        assert!(req.validate().is_err());
    }

    #[test]
    fn transient_classes() {
        assert!(BackendError::Network("reset".into()).is_transient());
        assert!(BackendError::Status { status: 429, body: String::new() }.is_transient());
        assert!(BackendError::Status { status: 503, body: String::new() }.is_transient());
        assert!(!BackendError::Status { status: 401, body: String::new() }.is_transient());
        assert!(!BackendError::MalformedBody("x".into()).is_transient());
    }

    #[test]
    fn full_text_skips_empty_system() {
        let req = LmRequest::single("t", "", "hello", Sampling::GENERAL);
        assert_eq!(req.full_text(), "hello");
        let req = LmRequest::single("t", "sys", "hello", Sampling::GENERAL);
        assert_eq!(req.full_text(), "sys\n\nhello");
    }
}
