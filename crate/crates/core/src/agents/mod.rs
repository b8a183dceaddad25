//! Role agents and the general agents that run a lesson around them.
//!
//! A role agent pairs a persona (its scales) with an ACT* cognitive state and
//! a backend. General agents are stateless services: the planner drafts the
//! teaching plan, the supervisor judges stage progress, the consistency
//! checker vets drafts against personas, the willingness scorer rates how
//! eager each student is to answer, and the classifier decides whether a
//! teacher line is a question and for whom.

mod general;
mod plan;
mod role;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cognition::CognitionError;
use crate::lm_backend::BackendError;

pub use general::{
    parse_verdict, select_random, select_speaker, Classification, GeneralAgent, GeneralAgents, Verdict,
};
pub use plan::{Stage, TeachingPlan};
pub use role::{AgentRole, RoleAgent, RoleAgentSettings};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalValue {
    Continue,
    AdvanceStage,
    EndLesson,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signal {
    pub value: SignalValue,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WillingnessScore {
    pub agent: AgentId,
    pub score: u8,
    pub rationale: String,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("{op} call failed: {source}")]
    Backend {
        op: &'static str,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Cognition(#[from] CognitionError),
    #[error("teaching plan: {0}")]
    PlanParse(String),
    #[error("topic is empty")]
    EmptyTopic,
    #[error("stage {index} is out of range for a {len}-stage plan")]
    InvalidStage { index: usize, len: usize },
    #[error("supervisor reply does not start with CONTINUE, ADVANCE or END: {0:?}")]
    SupervisorProtocol(String),
    #[error("consistency checker reply is not CONSISTENT or INCONSISTENT with a note: {0:?}")]
    ConsistencyProtocol(String),
    #[error("willingness reply for {agent} has no SCORE between 1 and 5: {reply:?}")]
    WillingnessProtocol { agent: AgentId, reply: String },
    #[error("classifier reply is not STATEMENT, CLASS or STUDENT: <name>: {0:?}")]
    ClassifierProtocol(String),
    #[error("draft utterance is empty")]
    EmptyDraft,
    #[error("no students to choose from")]
    NoStudents,
    #[error("no willingness scores to choose from")]
    EmptyScores,
    #[error("{0} is not in the roster")]
    UnknownAgent(AgentId),
}
