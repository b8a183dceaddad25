use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::transcript::SelectionMode;
use super::OrchestratorError;
use crate::cognition::{PromptTemplates, SkillLibrary, DEFAULT_SKILL_K, DEFAULT_WORKING_CAPACITY};
use crate::lm_backend::{
    record_replay, with_retry, Backend, CassetteMode, HttpBackend, HttpSettings, RetryPolicy, ScriptedBackend,
};
use crate::scale::{LoadMode, PersonaProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Scripted,
    Http,
    Replay,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scripted" => Ok(Self::Scripted),
            "http" => Ok(Self::Http),
            "replay" => Ok(Self::Replay),
            other => Err(format!("unknown backend {other:?} (expected scripted, http or replay)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cassette: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub http: Option<HttpSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry: Option<RetryConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryConfig {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    /// Teacher turns in the whole lesson.
    pub max_turns: u64,
    /// Teacher turns within one stage before it is closed without a verdict.
    pub max_stage_turns: u64,
    pub working_memory_capacity: usize,
    /// `None` (JSON `"all"`) injects the whole skill library.
    #[serde(with = "skill_k")]
    pub skill_k: Option<usize>,
    /// Recent speech lines shown to the supervisor and willingness scorer.
    pub context_window: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_turns: 40,
            max_stage_turns: 12,
            working_memory_capacity: DEFAULT_WORKING_CAPACITY,
            skill_k: Some(DEFAULT_SKILL_K),
            context_window: 10,
        }
    }
}

mod skill_k {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Count(usize),
        Word(String),
    }

    pub fn serialize<S: Serializer>(k: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        match k {
            Some(k) => s.serialize_u64(*k as u64),
            None => s.serialize_str("all"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Count(k) => Ok(Some(k)),
            Raw::Word(w) if w == "all" => Ok(None),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("expected a count or \"all\", got {w:?}"))),
        }
    }
}

fn default_persona_check_m() -> usize {
    2
}

fn default_distill_every() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topic: String,
    pub teacher: PathBuf,
    pub students: Vec<PathBuf>,
    pub skill_library: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_templates: Option<PathBuf>,
    pub backend: BackendConfig,
    pub selection_mode: SelectionMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub limits: Limits,
    /// Coarse traits probed per scale when the scenario loads; 0 skips.
    #[serde(default = "default_persona_check_m")]
    pub persona_check_m: usize,
    #[serde(default = "default_distill_every")]
    pub distill_every: u64,
    /// Accept scale documents whose shape differs from the standard instrument.
    #[serde(default)]
    pub lenient_scales: bool,
    /// Memory exported by an earlier lesson, keyed by agent name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_import: Option<PathBuf>,
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub backend: Option<BackendKind>,
    pub selection_mode: Option<SelectionMode>,
    pub seed: Option<u64>,
    pub lenient: bool,
    /// Record every backend exchange to this cassette.
    pub record: Option<PathBuf>,
}

/// A parsed config plus the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub base_dir: PathBuf,
    pub config: ScenarioConfig,
}

impl LoadedConfig {
    pub fn read(path: &Path) -> Result<Self, OrchestratorError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(path, "(file)", e))?;
        let config: ScenarioConfig = serde_json::from_str(&text).map_err(|e| config_error(path, "(document)", e))?;
        let loaded = Self {
            path: path.to_path_buf(),
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            config,
        };
        loaded.check()?;
        Ok(loaded)
    }

    pub fn apply(&mut self, overrides: &Overrides) -> Result<(), OrchestratorError> {
        if let Some(kind) = overrides.backend {
            self.config.backend.kind = kind;
        }
        if let Some(mode) = overrides.selection_mode {
            self.config.selection_mode = mode;
        }
        if let Some(seed) = overrides.seed {
            self.config.seed = seed;
        }
        self.config.lenient_scales |= overrides.lenient;
        self.check()
    }

    pub fn resolve(&self, relative: &Path) -> PathBuf {
        self.base_dir.join(relative)
    }

    fn error(&self, field: &str, message: impl std::fmt::Display) -> OrchestratorError {
        config_error(&self.path, field, message)
    }

    fn check(&self) -> Result<(), OrchestratorError> {
        let c = &self.config;
        if c.topic.trim().is_empty() {
            return Err(self.error("topic", "must not be empty"));
        }
        if c.students.is_empty() {
            return Err(self.error("students", "roster must name at least one student"));
        }
        let l = &c.limits;
        for (field, value) in [
            ("limits.max_turns", l.max_turns as usize),
            ("limits.max_stage_turns", l.max_stage_turns as usize),
            ("limits.working_memory_capacity", l.working_memory_capacity),
            ("limits.context_window", l.context_window),
        ] {
            if value == 0 {
                return Err(self.error(field, "must be positive"));
            }
        }
        if l.skill_k == Some(0) {
            return Err(self.error("limits.skill_k", "must be positive or \"all\""));
        }
        if c.distill_every == 0 {
            return Err(self.error("distill_every", "must be positive"));
        }
        let b = &c.backend;
        match b.kind {
            BackendKind::Scripted if b.script.is_none() => Err(self.error("backend.script", "required for the scripted backend")),
            BackendKind::Replay if b.cassette.is_none() => Err(self.error("backend.cassette", "required for the replay backend")),
            BackendKind::Http if b.http.is_none() => Err(self.error("backend.http", "required for the http backend")),
            _ => Ok(()),
        }
    }

    pub fn load_mode(&self) -> LoadMode {
        if self.config.lenient_scales {
            LoadMode::Lenient
        } else {
            LoadMode::Strict
        }
    }

    pub fn teacher_profile(&self) -> Result<PersonaProfile, OrchestratorError> {
        self.profile("teacher", &self.config.teacher)
    }

    pub fn student_profiles(&self) -> Result<Vec<PersonaProfile>, OrchestratorError> {
        self.config
            .students
            .iter()
            .enumerate()
            .map(|(i, p)| self.profile(&format!("students[{i}]"), p))
            .collect()
    }

    fn profile(&self, field: &str, path: &Path) -> Result<PersonaProfile, OrchestratorError> {
        PersonaProfile::load_with(&self.resolve(path), self.load_mode()).map_err(|e| self.error(field, e))
    }

    pub fn skills(&self) -> Result<SkillLibrary, OrchestratorError> {
        SkillLibrary::load(&self.resolve(&self.config.skill_library)).map_err(|e| self.error("skill_library", e))
    }

    pub fn templates(&self) -> Result<PromptTemplates, OrchestratorError> {
        match &self.config.prompt_templates {
            Some(p) => PromptTemplates::load(&self.resolve(p)).map_err(|e| self.error("prompt_templates", e)),
            None => Ok(PromptTemplates::default()),
        }
    }

    /// Builds the configured backend, wrapped for recording when asked.
    pub fn backend(&self, record: Option<&Path>) -> Result<Backend, OrchestratorError> {
        let b = &self.config.backend;
        let base: Backend = match b.kind {
            BackendKind::Scripted => {
                let path = self.resolve(b.script.as_deref().expect("checked"));
                Arc::new(ScriptedBackend::from_file(&path).map_err(|e| self.error("backend.script", e))?)
            }
            BackendKind::Replay => {
                let path = self.resolve(b.cassette.as_deref().expect("checked"));
                record_replay(None, &path, CassetteMode::Replay).map_err(|e| self.error("backend.cassette", e))?
            }
            BackendKind::Http => {
                let settings = b.http.as_ref().expect("checked");
                let http: Backend =
                    Arc::new(HttpBackend::from_settings(settings).map_err(|e| self.error("backend.http", e))?);
                let policy = b
                    .retry
                    .map(|r| RetryPolicy {
                        max_attempts: r.max_attempts,
                        base_delay: std::time::Duration::from_millis(r.base_delay_ms),
                    })
                    .unwrap_or_default();
                with_retry(http, policy).map_err(|e| self.error("backend.retry", e))?
            }
        };
        match record {
            Some(path) => record_replay(Some(base), path, CassetteMode::Record).map_err(|e| config_error(path, "(cassette)", e)),
            None => Ok(base),
        }
    }
}

pub(crate) fn config_error(file: &Path, field: &str, message: impl std::fmt::Display) -> OrchestratorError {
    OrchestratorError::Config {
        file: file.display().to_string(),
        field: field.to_string(),
        message: message.to_string(),
    }
}
