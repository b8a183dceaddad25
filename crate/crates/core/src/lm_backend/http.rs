use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendError, LanguageModel, LmRequest, LmResponse, Usage};

pub const API_BASE_ENV: &str = "CGMI_API_BASE";
pub const API_KEY_ENV: &str = "CGMI_API_KEY";
const DEFAULT_BASE: &str = "https://api.openai.com";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpSettings {
    pub model: String,
    /// Overrides `CGMI_API_BASE` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    120
}

/// Client for an OpenAI-compatible `POST /v1/chat/completions` endpoint.
#[derive(Clone)]
pub struct HttpBackend {
    client: reqwest::Client,
    endpoint: String,
    api_key: Option<String>,
    model: String,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl HttpBackend {
    pub fn new(
        base_url: &str,
        api_key: Option<String>,
        model: impl Into<String>,
        timeout: Duration,
    ) -> Result<Self, BackendError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Config(format!("http client: {e}")))?;
        Ok(Self {
            client,
            endpoint: format!("{}/v1/chat/completions", base_url.trim_end_matches('/')),
            api_key: api_key.filter(|k| !k.is_empty()),
            model: model.into(),
        })
    }

    /// Reads the base URL and credential from the environment.
    pub fn from_settings(settings: &HttpSettings) -> Result<Self, BackendError> {
        let base = settings
            .base_url
            .clone()
            .or_else(|| std::env::var(API_BASE_ENV).ok())
            .unwrap_or_else(|| DEFAULT_BASE.to_string());
        let key = std::env::var(API_KEY_ENV).ok();
        Self::new(
            &base,
            key,
            settings.model.clone(),
            Duration::from_secs(settings.timeout_secs),
        )
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn body(&self, request: &LmRequest) -> Value {
        let mut messages = Vec::with_capacity(request.messages.len() + 1);
        if !request.system.is_empty() {
            messages.push(json!({"role": "system", "content": request.system}));
        }
        for m in &request.messages {
            messages.push(json!({"role": m.role, "content": m.content}));
        }
        json!({
            "model": self.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChatUsage {
    #[serde(default)]
    prompt_tokens: u32,
    #[serde(default)]
    completion_tokens: u32,
}

#[async_trait]
impl LanguageModel for HttpBackend {
    async fn complete(&self, request: &LmRequest) -> Result<LmResponse, BackendError> {
        request.validate()?;
        let started = Instant::now();
        let mut builder = self.client.post(&self.endpoint).json(&self.body(request));
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        tracing::debug!(tag = %request.tag, endpoint = %self.endpoint, "chat completion");
        let response = builder
            .send()
            .await
            .map_err(|e| BackendError::Network(e.without_url().to_string()))?;
        let status = response.status();
        let body = response
            .text()
            .await
            .map_err(|e| BackendError::Network(e.without_url().to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Status {
                status: status.as_u16(),
                body: body.chars().take(500).collect(),
            });
        }
        let parsed: ChatResponse =
            serde_json::from_str(&body).map_err(|e| BackendError::MalformedBody(e.to_string()))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::MalformedBody("no choice with message content".into()))?;
        let usage = parsed
            .usage
            .map(|u| Usage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            })
            .unwrap_or_default();
        Ok(LmResponse {
            text,
            usage,
            latency: started.elapsed(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm_backend::Sampling;

    #[test]
    fn debug_never_shows_key() {
        let b = HttpBackend::new(
            "http://localhost:1/",
            Some("sk-secret".into()),
            "m",
            Duration::from_secs(1),
        )
        .unwrap();
        let dbg = format!("{b:?}");
        assert!(!dbg.contains("sk-secret"));
        assert_eq!(b.endpoint(), "http://localhost:1/v1/chat/completions");
    }

    #[test]
    fn body_puts_system_first() {
        let b = HttpBackend::new("http://x", None, "gpt", Duration::from_secs(1)).unwrap();
        let req = LmRequest::single("t", "sys", "hello", Sampling::GENERAL);
        let body = b.body(&req);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["content"], "hello");
        assert_eq!(body["model"], "gpt");
    }
}
