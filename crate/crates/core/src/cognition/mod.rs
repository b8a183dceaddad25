//! ACT*-style cognition: working memory distilled into declarative and
//! procedural memory, skill-backed reflection and planning, and action.
//!
//! One full cycle at turn `t` is five backend calls, always in this order:
//! `distill_cot`, `distill_coa`, `reflect`, `plan`, `act`. An agent's very
//! first cycle is a cold start: reflection and plan are seeded empty and only
//! `act` is called.

mod memory;
mod templates;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm_backend::{tags, BackendError, LanguageModel, LmRequest, Sampling};

pub use memory::{
    retrieve_skills, render_skills, MemoryEntry, MemoryKind, Perception, SkillEntry, SkillLibrary,
    Stamped, WorkingMemory, DEFAULT_WORKING_CAPACITY,
};
pub use templates::{fill, PromptTemplates, PLACEHOLDERS};

pub const DEFAULT_SKILL_K: usize = 3;

#[derive(Debug, Error)]
pub enum CognitionError {
    #[error("turn {got} is earlier than the last perceived turn {last}")]
    OutOfOrderTurn { last: u64, got: u64 },
    #[error("observation is empty")]
    EmptyObservation,
    #[error("working memory is empty")]
    EmptyWorkingMemory,
    #[error("no declarative memory at or before turn {0}")]
    NoDeclarativeMemory(u64),
    #[error("no procedural memory at or before turn {0}")]
    NoProceduralMemory(u64),
    #[error("no reflection for turn {want} (latest: {have:?})")]
    StaleReflection { want: u64, have: Option<u64> },
    #[error("no plan for turn {want} (latest: {have:?})")]
    StalePlan { want: u64, have: Option<u64> },
    #[error("{op} returned an empty response")]
    EmptyResponse { op: &'static str },
    #[error("{op} call failed: {source}")]
    Backend {
        op: &'static str,
        #[source]
        source: BackendError,
    },
    #[error("prompt templates: {0}")]
    Template(String),
    #[error("skill library: {0}")]
    Skills(String),
}

/// Everything a cognitive call needs besides the state itself.
#[derive(Clone, Copy)]
pub struct Mind<'a> {
    pub backend: &'a dyn LanguageModel,
    pub templates: &'a PromptTemplates,
    /// System preamble: the agent's rendered persona.
    pub persona: &'a str,
    pub sampling: Sampling,
    /// `None` injects the whole skill library.
    pub skill_k: Option<usize>,
}

impl Mind<'_> {
    async fn call(&self, op: &'static str, tag: &str, prompt: String) -> Result<String, CognitionError> {
        let request = LmRequest::single(tag, self.persona, prompt, self.sampling);
        let response = self
            .backend
            .complete(&request)
            .await
            .map_err(|source| CognitionError::Backend { op, source })?;
        Ok(response.text)
    }
}

/// Memory carried between lessons.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemorySnapshot {
    pub declarative: Vec<MemoryEntry>,
    pub procedural: Vec<MemoryEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_reflection: Option<Stamped>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_plan: Option<Stamped>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CognitiveState {
    working: WorkingMemory,
    declarative: Vec<MemoryEntry>,
    procedural: Vec<MemoryEntry>,
    #[serde(skip)]
    skills: Arc<SkillLibrary>,
    last_reflection: Option<Stamped>,
    last_plan: Option<Stamped>,
    last_turn: Option<u64>,
    cycles: u64,
    distill_every: u64,
}

impl CognitiveState {
    pub fn new(capacity: usize, skills: Arc<SkillLibrary>) -> Self {
        Self {
            working: WorkingMemory::with_capacity(capacity),
            declarative: Vec::new(),
            procedural: Vec::new(),
            skills,
            last_reflection: None,
            last_plan: None,
            last_turn: None,
            cycles: 0,
            distill_every: 1,
        }
    }

    /// Distill on every `k`-th full cycle (and whenever a store is still empty).
    pub fn with_distill_every(mut self, k: u64) -> Self {
        self.distill_every = k.max(1);
        self
    }

    pub fn working(&self) -> &WorkingMemory {
        &self.working
    }

    pub fn declarative(&self) -> &[MemoryEntry] {
        &self.declarative
    }

    pub fn procedural(&self) -> &[MemoryEntry] {
        &self.procedural
    }

    pub fn skills(&self) -> &SkillLibrary {
        &self.skills
    }

    pub fn last_reflection(&self) -> Option<&Stamped> {
        self.last_reflection.as_ref()
    }

    pub fn last_plan(&self) -> Option<&Stamped> {
        self.last_plan.as_ref()
    }

    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    /// Stores an observation in working memory.
    pub fn perceive(&mut self, turn: u64, observation: &str) -> Result<(), CognitionError> {
        if let Some(last) = self.last_turn {
            if turn < last {
                return Err(CognitionError::OutOfOrderTurn { last, got: turn });
            }
        }
        if observation.trim().is_empty() {
            return Err(CognitionError::EmptyObservation);
        }
        self.working.push(turn, observation.to_string());
        self.last_turn = Some(turn);
        Ok(())
    }

    /// Summarizes working memory under the CoT (declarative) or CoA
    /// (procedural) instruction and appends the result to that store.
    pub async fn distill(
        &mut self,
        turn: u64,
        kind: MemoryKind,
        mind: &Mind<'_>,
    ) -> Result<MemoryEntry, CognitionError> {
        let span = self.working.span().ok_or(CognitionError::EmptyWorkingMemory)?;
        let (instruction, tag, op) = match kind {
            MemoryKind::Declarative => (&mind.templates.cot_instruction, tags::DISTILL_COT, "distill_cot"),
            MemoryKind::Procedural => (&mind.templates.coa_instruction, tags::DISTILL_COA, "distill_coa"),
        };
        let prompt = format!("{instruction}\n\n## Working memory\n{}", self.working.render());
        let content = mind.call(op, tag, prompt).await?;
        if content.trim().is_empty() {
            return Err(CognitionError::EmptyResponse { op });
        }
        let entry = MemoryEntry {
            turn,
            kind,
            content,
            source_span: (span.0, span.1.min(turn)),
        };
        match kind {
            MemoryKind::Declarative => self.declarative.push(entry.clone()),
            MemoryKind::Procedural => self.procedural.push(entry.clone()),
        }
        Ok(entry)
    }

    fn latest(entries: &[MemoryEntry], turn: u64) -> Option<&MemoryEntry> {
        entries.iter().rev().find(|e| e.turn <= turn)
    }

    fn skills_for(&self, query: &str, mind: &Mind<'_>) -> String {
        render_skills(&retrieve_skills(&self.skills, query, mind.skill_k))
    }

    /// Reflection from the latest declarative entry plus retrieved skills.
    pub async fn reflect(&mut self, turn: u64, mind: &Mind<'_>) -> Result<String, CognitionError> {
        let latest = Self::latest(&self.declarative, turn)
            .ok_or(CognitionError::NoDeclarativeMemory(turn))?;
        let skills = self.skills_for(&latest.content, mind);
        let prompt = fill(
            &mind.templates.reflect,
            &[("declarative", &latest.content), ("skills", &skills), ("persona", mind.persona)],
        );
        let text = mind.call("reflect", tags::REFLECT, prompt).await?;
        self.last_reflection = Some(Stamped { turn, text: text.clone() });
        Ok(text)
    }

    /// Plan from the latest procedural entry plus retrieved skills.
    pub async fn plan(&mut self, turn: u64, mind: &Mind<'_>) -> Result<String, CognitionError> {
        let latest = Self::latest(&self.procedural, turn)
            .ok_or(CognitionError::NoProceduralMemory(turn))?;
        let skills = self.skills_for(&latest.content, mind);
        let prompt = fill(
            &mind.templates.plan,
            &[("procedural", &latest.content), ("skills", &skills), ("persona", mind.persona)],
        );
        let text = mind.call("plan", tags::PLAN, prompt).await?;
        self.last_plan = Some(Stamped { turn, text: text.clone() });
        Ok(text)
    }

    /// The next utterance from reflection, plan and working memory, in that
    /// order. The reply is returned untouched. `note` is appended as a
    /// correction section when a draft is being regenerated.
    pub async fn act(
        &self,
        turn: u64,
        mind: &Mind<'_>,
        note: Option<&str>,
    ) -> Result<String, CognitionError> {
        let reflection = self
            .last_reflection
            .as_ref()
            .filter(|r| r.turn == turn)
            .ok_or(CognitionError::StaleReflection {
                want: turn,
                have: self.last_reflection.as_ref().map(|r| r.turn),
            })?;
        let plan = self
            .last_plan
            .as_ref()
            .filter(|p| p.turn == turn)
            .ok_or(CognitionError::StalePlan {
                want: turn,
                have: self.last_plan.as_ref().map(|p| p.turn),
            })?;
        let working = self.working.render();
        let mut prompt = fill(
            &mind.templates.act,
            &[
                ("reflection", &reflection.text),
                ("plan", &plan.text),
                ("working_memory", &working),
                ("persona", mind.persona),
            ],
        );
        if let Some(note) = note {
            prompt.push_str("\n\n## Persona correction\n");
            prompt.push_str(note);
        }
        mind.call("act", tags::ACT, prompt).await
    }

    /// Seeds empty reflection and plan for `turn` so `act` can run before any
    /// memory exists.
    pub fn seed_cold_start(&mut self, turn: u64) {
        self.last_reflection = Some(Stamped { turn, text: String::new() });
        self.last_plan = Some(Stamped { turn, text: String::new() });
    }

    pub fn is_cold(&self) -> bool {
        self.cycles == 0
    }

    /// Runs one cognitive cycle for `turn` and returns the draft utterance.
    pub async fn cycle(&mut self, turn: u64, mind: &Mind<'_>) -> Result<String, CognitionError> {
        if self.is_cold() {
            self.seed_cold_start(turn);
        } else {
            let due = (self.cycles - 1).is_multiple_of(self.distill_every);
            if due || self.declarative.is_empty() || self.procedural.is_empty() {
                self.distill(turn, MemoryKind::Declarative, mind).await?;
                self.distill(turn, MemoryKind::Procedural, mind).await?;
            }
            self.reflect(turn, mind).await?;
            self.plan(turn, mind).await?;
        }
        self.cycles += 1;
        self.act(turn, mind, None).await
    }

    pub fn export(&self) -> MemorySnapshot {
        MemorySnapshot {
            declarative: self.declarative.clone(),
            procedural: self.procedural.clone(),
            last_reflection: self.last_reflection.clone(),
            last_plan: self.last_plan.clone(),
        }
    }

    /// Appends a previous lesson's memory, restamped at turn 0. The old
    /// reflection and plan join the declarative and procedural stores so the
    /// next reflection builds on them.
    pub fn import(&mut self, snapshot: &MemorySnapshot) {
        let restamp = |e: &MemoryEntry| MemoryEntry {
            turn: 0,
            kind: e.kind,
            content: e.content.clone(),
            source_span: (0, 0),
        };
        self.declarative.extend(snapshot.declarative.iter().map(restamp));
        self.procedural.extend(snapshot.procedural.iter().map(restamp));
        let carry = |s: &Option<Stamped>, kind| {
            s.as_ref().filter(|s| !s.text.trim().is_empty()).map(|s| MemoryEntry {
                turn: 0,
                kind,
                content: s.text.clone(),
                source_span: (0, 0),
            })
        };
        self.declarative.extend(carry(&snapshot.last_reflection, MemoryKind::Declarative));
        self.procedural.extend(carry(&snapshot.last_plan, MemoryKind::Procedural));
    }
}
