use std::path::Path;
use std::sync::Mutex;

use async_trait::async_trait;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{BackendError, LanguageModel, LmRequest, LmResponse};

const NO_MATCH_PREVIEW: usize = 200;

/// How a script entry recognises a request. Patterns are tested against the
/// request's full text (system preamble plus every message).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "match", content = "pattern", rename_all = "lowercase")]
pub enum Matcher {
    Exact(String),
    Substring(String),
    Regex(String),
}

impl Matcher {
    fn pattern(&self) -> &str {
        match self {
            Matcher::Exact(p) | Matcher::Substring(p) | Matcher::Regex(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(flatten)]
    pub matcher: Matcher,
    pub response: String,
    /// `None` means unlimited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_uses: Option<u32>,
    /// Restricts the entry to requests carrying this tag.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl ScriptEntry {
    pub fn substring(pattern: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            matcher: Matcher::Substring(pattern.into()),
            response: response.into(),
            max_uses: None,
            tag: None,
        }
    }

    pub fn regex(pattern: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            matcher: Matcher::Regex(pattern.into()),
            response: response.into(),
            max_uses: None,
            tag: None,
        }
    }

    pub fn exact(pattern: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            matcher: Matcher::Exact(pattern.into()),
            response: response.into(),
            max_uses: None,
            tag: None,
        }
    }

    pub fn for_tag(mut self, tag: &str) -> Self {
        self.tag = Some(tag.to_string());
        self
    }

    pub fn uses(mut self, n: u32) -> Self {
        self.max_uses = Some(n);
        self
    }
}

enum Compiled {
    Exact(String),
    Substring(String),
    Regex(Regex),
}

impl Compiled {
    fn matches(&self, text: &str) -> bool {
        match self {
            Compiled::Exact(p) => text == p,
            Compiled::Substring(p) => text.contains(p.as_str()),
            Compiled::Regex(r) => r.is_match(text),
        }
    }
}

/// Deterministic backend answering from an ordered script.
///
/// The first entry (in declaration order) whose tag filter and pattern both
/// match, and whose `max_uses` is not exhausted, supplies the response. A
/// request nothing matches is an error: it marks a prompt path the script
/// does not cover.
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    compiled: Vec<Compiled>,
    uses: Mutex<Vec<u32>>,
}

impl std::fmt::Debug for ScriptedBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScriptedBackend")
            .field("entries", &self.entries.len())
            .finish()
    }
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Result<Self, BackendError> {
        let mut compiled = Vec::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            if entry.matcher.pattern().is_empty() {
                return Err(BackendError::Config(format!(
                    "script entry {i} has an empty pattern"
                )));
            }
            compiled.push(match &entry.matcher {
                Matcher::Exact(p) => Compiled::Exact(p.clone()),
                Matcher::Substring(p) => Compiled::Substring(p.clone()),
                Matcher::Regex(p) => Compiled::Regex(Regex::new(p).map_err(|e| {
                    BackendError::Config(format!("script entry {i}: bad regex: {e}"))
                })?),
            });
        }
        let uses = Mutex::new(vec![0; entries.len()]);
        Ok(Self {
            entries,
            compiled,
            uses,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let entries: Vec<ScriptEntry> = serde_json::from_str(text)
            .map_err(|e| BackendError::Config(format!("script does not parse: {e}")))?;
        Self::new(entries)
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))
    }

    pub fn entries(&self) -> &[ScriptEntry] {
        &self.entries
    }

    /// How many times each entry has answered so far.
    pub fn use_counts(&self) -> Vec<u32> {
        self.uses.lock().expect("script counter poisoned").clone()
    }

    fn answer(&self, request: &LmRequest) -> Result<String, BackendError> {
        let text = request.full_text();
        // Lookup and increment under one lock so concurrent callers never
        // overrun max_uses.
        let mut uses = self.uses.lock().expect("script counter poisoned");
        for (i, (entry, compiled)) in self.entries.iter().zip(&self.compiled).enumerate() {
            if let Some(tag) = &entry.tag {
                if tag != &request.tag {
                    continue;
                }
            }
            if let Some(max) = entry.max_uses {
                if uses[i] >= max {
                    continue;
                }
            }
            if compiled.matches(&text) {
                uses[i] += 1;
                return Ok(entry.response.clone());
            }
        }
        Err(BackendError::NoMatch {
            tag: request.tag.clone(),
            prompt: request.prompt().chars().take(NO_MATCH_PREVIEW).collect(),
        })
    }
}

#[async_trait]
impl LanguageModel for ScriptedBackend {
    async fn complete(&self, request: &LmRequest) -> Result<LmResponse, BackendError> {
        request.validate()?;
        self.answer(request).map(LmResponse::text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm_backend::Sampling;

    fn req(tag: &str, prompt: &str) -> LmRequest {
        LmRequest::single(tag, "", prompt, Sampling::GENERAL)
    }

    #[tokio::test]
    async fn substring_entry_answers_distill_prompt() {
        let backend = ScriptedBackend::new(vec![ScriptEntry::substring(
            "Summarize the class content",
            "D-SUM",
        )])
        .unwrap();
        let out = backend
            .complete(&req("distill_cot", "Summarize the class content sequentially.\n\n..."))
            .await
            .unwrap();
        assert_eq!(out.text, "D-SUM");
    }

    #[tokio::test]
    async fn no_match_carries_prompt_prefix() {
        let backend = ScriptedBackend::new(vec![ScriptEntry::substring("zzz", "x")]).unwrap();
        let prompt = "p".repeat(500);
        let err = backend.complete(&req("act", &prompt)).await.unwrap_err();
        match err {
            BackendError::NoMatch { tag, prompt } => {
                assert_eq!(tag, "act");
                assert_eq!(prompt.len(), 200);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[tokio::test]
    async fn declaration_order_and_max_uses() {
        let backend = ScriptedBackend::new(vec![
            ScriptEntry::substring("q", "first").uses(1),
            ScriptEntry::regex("^q+$", "second"),
            ScriptEntry::substring("q", "third"),
        ])
        .unwrap();
        let a = backend.complete(&req("t", "qq")).await.unwrap().text;
        let b = backend.complete(&req("t", "qq")).await.unwrap().text;
        let c = backend.complete(&req("t", "qq")).await.unwrap().text;
        assert_eq!((a.as_str(), b.as_str(), c.as_str()), ("first", "second", "second"));
        assert_eq!(backend.use_counts(), vec![1, 2, 0]);
    }

    #[tokio::test]
    async fn tag_filter_and_exact() {
        let backend = ScriptedBackend::new(vec![
            ScriptEntry::substring("x", "tagged").for_tag("reflect"),
            ScriptEntry::exact("x", "exact"),
        ])
        .unwrap();
        assert_eq!(backend.complete(&req("reflect", "x")).await.unwrap().text, "tagged");
        assert_eq!(backend.complete(&req("plan", "x")).await.unwrap().text, "exact");
        assert!(backend.complete(&req("plan", "xx")).await.is_err());
    }

    #[test]
    fn empty_pattern_and_bad_regex_rejected() {
        assert!(ScriptedBackend::new(vec![ScriptEntry::substring("", "x")]).is_err());
        assert!(ScriptedBackend::new(vec![ScriptEntry::regex("(", "x")]).is_err());
    }

    #[test]
    fn script_file_format() {
        let json = r#"[
            {"match": "substring", "pattern": "hello", "response": "hi", "tag": "act"},
            {"match": "regex", "pattern": "^a.*", "response": "b", "max_uses": 2}
        ]"#;
        let backend = ScriptedBackend::from_json(json).unwrap();
        assert_eq!(backend.entries()[0].tag.as_deref(), Some("act"));
        assert_eq!(backend.entries()[1].max_uses, Some(2));
        assert_eq!(backend.entries()[1].matcher, Matcher::Regex("^a.*".into()));
    }
}
