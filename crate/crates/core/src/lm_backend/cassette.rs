use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, BackendError, LanguageModel, LmRequest, LmResponse, Message, Usage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CassetteMode {
    Record,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Recorded {
    text: String,
    #[serde(default)]
    usage: Usage,
}

/// On-disk cassette: digest to the responses observed for it, in call order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct CassetteFile {
    version: u32,
    entries: BTreeMap<String, Vec<Recorded>>,
}

#[derive(Serialize)]
struct DigestInput<'a> {
    system: &'a str,
    messages: &'a [Message],
    temperature: f64,
    max_tokens: u32,
}

/// SHA-256 over the request content. The tag and timing are excluded.
pub fn request_digest(request: &LmRequest) -> String {
    let input = DigestInput {
        system: &request.system,
        messages: &request.messages,
        temperature: request.temperature,
        max_tokens: request.max_tokens,
    };
    let bytes = serde_json::to_vec(&input).expect("digest input serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Record or replay wrapper around a backend.
///
/// Repeated identical requests are kept in order, and replay serves them in
/// the same order (the last one repeats once exhausted).
pub struct RecordReplay {
    inner: Option<Backend>,
    path: PathBuf,
    mode: CassetteMode,
    state: Mutex<(CassetteFile, HashMap<String, usize>)>,
}

impl RecordReplay {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn mode(&self) -> CassetteMode {
        self.mode
    }

    fn persist(&self, file: &CassetteFile) -> Result<(), BackendError> {
        let text = serde_json::to_string_pretty(file)
            .map_err(|e| BackendError::Cassette(e.to_string()))?;
        std::fs::write(&self.path, text)
            .map_err(|e| BackendError::Cassette(format!("{}: {e}", self.path.display())))
    }
}

/// Wraps `inner` for recording, or opens a cassette for network-free replay
/// (`inner` is ignored in replay mode and may be `None`).
pub fn record_replay(
    inner: Option<Backend>,
    path: &Path,
    mode: CassetteMode,
) -> Result<Backend, BackendError> {
    let file = match mode {
        CassetteMode::Replay => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| BackendError::Cassette(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| BackendError::Cassette(format!("{}: {e}", path.display())))?
        }
        CassetteMode::Record => {
            if inner.is_none() {
                return Err(BackendError::Config(
                    "record mode needs an inner backend".into(),
                ));
            }
            CassetteFile {
                version: 1,
                entries: BTreeMap::new(),
            }
        }
    };
    let wrapper = RecordReplay {
        inner,
        path: path.to_path_buf(),
        mode,
        state: Mutex::new((file, HashMap::new())),
    };
    if mode == CassetteMode::Record {
        let state = wrapper.state.lock().expect("cassette lock");
        wrapper.persist(&state.0)?;
    }
    Ok(Arc::new(wrapper))
}

#[async_trait]
impl LanguageModel for RecordReplay {
    async fn complete(&self, request: &LmRequest) -> Result<LmResponse, BackendError> {
        let digest = request_digest(request);
        match self.mode {
            CassetteMode::Replay => {
                let mut state = self.state.lock().expect("cassette lock");
                let (file, cursors) = &mut *state;
                let recorded = file
                    .entries
                    .get(&digest)
                    .filter(|v| !v.is_empty())
                    .ok_or_else(|| BackendError::ReplayMiss(digest.clone()))?;
                let cursor = cursors.entry(digest).or_insert(0);
                let hit = &recorded[(*cursor).min(recorded.len() - 1)];
                *cursor += 1;
                Ok(LmResponse {
                    text: hit.text.clone(),
                    usage: hit.usage,
                    latency: std::time::Duration::ZERO,
                })
            }
            CassetteMode::Record => {
                let inner = self.inner.as_ref().expect("checked at construction");
                let response = inner.complete(request).await?;
                let mut state = self.state.lock().expect("cassette lock");
                state.0.entries.entry(digest).or_default().push(Recorded {
                    text: response.text.clone(),
                    usage: response.usage,
                });
                self.persist(&state.0)?;
                Ok(response)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm_backend::{Sampling, ScriptEntry, ScriptedBackend};

    fn req(tag: &str, prompt: &str) -> LmRequest {
        LmRequest::single(tag, "sys", prompt, Sampling::GENERAL)
    }

    #[test]
    fn digest_ignores_tag_but_not_content() {
        assert_eq!(request_digest(&req("a", "x")), request_digest(&req("b", "x")));
        assert_ne!(request_digest(&req("a", "x")), request_digest(&req("a", "y")));
        let mut hot = req("a", "x");
        hot.temperature = 0.7;
        assert_ne!(request_digest(&hot), request_digest(&req("a", "x")));
    }

    #[tokio::test]
    async fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let script: Backend = Arc::new(
            ScriptedBackend::new(vec![
                ScriptEntry::substring("x", "one").uses(1),
                ScriptEntry::substring("x", "two"),
            ])
            .unwrap(),
        );
        let rec = record_replay(Some(script), &path, CassetteMode::Record).unwrap();
        let a = rec.complete(&req("t1", "x")).await.unwrap().text;
        let b = rec.complete(&req("t2", "x")).await.unwrap().text;
        assert_eq!((a.as_str(), b.as_str()), ("one", "two"));

        let replay = record_replay(None, &path, CassetteMode::Replay).unwrap();
        assert_eq!(replay.complete(&req("t9", "x")).await.unwrap().text, "one");
        assert_eq!(replay.complete(&req("t9", "x")).await.unwrap().text, "two");
        assert_eq!(replay.complete(&req("t9", "x")).await.unwrap().text, "two");
        match replay.complete(&req("t", "never")).await.unwrap_err() {
            BackendError::ReplayMiss(d) => assert_eq!(d, request_digest(&req("t", "never"))),
            e => panic!("{e:?}"),
        }
    }

    #[tokio::test]
    async fn empty_cassette_misses_first_call() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.json");
        std::fs::write(&path, r#"{"version":1,"entries":{}}"#).unwrap();
        let replay = record_replay(None, &path, CassetteMode::Replay).unwrap();
        assert!(matches!(
            replay.complete(&req("t", "x")).await,
            Err(BackendError::ReplayMiss(_))
        ));
    }

    #[test]
    fn missing_cassette_is_an_error() {
        assert!(record_replay(None, Path::new("/nonexistent/c.json"), CassetteMode::Replay).is_err());
        assert!(record_replay(None, Path::new("/tmp/x.json"), CassetteMode::Record).is_err());
    }
}
