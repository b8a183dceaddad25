use std::sync::LazyLock;

use futures::future::join_all;
use rand::seq::IndexedRandom;
use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{AgentError, AgentId, RoleAgent, Signal, SignalValue, TeachingPlan, WillingnessScore};
use crate::lm_backend::{tags, Backend, LmRequest, Sampling};
use crate::orchestrator::{render_events, TranscriptEvent};

const PLANNER_SYSTEM: &str = "You are a teaching assistant agent. You set educational goals and plan teaching schedules.";
const SUPERVISOR_SYSTEM: &str = "You supervise a lesson and decide when each teaching stage is complete.";
const CHECKER_SYSTEM: &str = "You check whether a role-play character's line fits their persona.";
const WILLINGNESS_SYSTEM: &str = "You estimate how willing a student is to answer a question in class.";
const CLASSIFIER_SYSTEM: &str = "You label what a teacher's line in class is doing.";

/// One stateless service agent: a backend plus its sampling settings.
#[derive(Clone)]
pub struct GeneralAgent {
    pub backend: Backend,
    pub sampling: Sampling,
}

/// The general agents of a scenario. Each can point at its own backend.
#[derive(Clone)]
pub struct GeneralAgents {
    pub planner: GeneralAgent,
    pub supervisor: GeneralAgent,
    pub checker: GeneralAgent,
    pub willingness: GeneralAgent,
    pub classifier: GeneralAgent,
}

impl GeneralAgents {
    pub fn shared(backend: Backend) -> Self {
        let agent = GeneralAgent::new(backend);
        Self {
            planner: agent.clone(),
            supervisor: agent.clone(),
            checker: agent.clone(),
            willingness: agent.clone(),
            classifier: agent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Inconsistent { note: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Statement,
    QuestionToClass,
    QuestionToStudent(String),
}

/// Splits a reply into its first non-blank line's leading keyword and the
/// remaining text.
fn keyword_reply(reply: &str) -> Option<(String, String)> {
    let mut lines = reply.lines().map(str::trim).skip_while(|l| l.is_empty());
    let first = lines.next()?;
    let end = first
        .find(|c: char| !(c.is_ascii_alphabetic() || c == '_'))
        .unwrap_or(first.len());
    let keyword = first[..end].to_ascii_uppercase();
    let mut rest = first[end..].trim_start_matches(|c: char| c.is_whitespace() || ":-.,".contains(c)).to_string();
    for line in lines.filter(|l| !l.is_empty()) {
        if !rest.is_empty() {
            rest.push(' ');
        }
        rest.push_str(line);
    }
    Some((keyword, rest))
}

/// Maps a supervisor reply to a signal, normalizing for the stage position:
/// ADVANCE on the final stage ends the lesson, END before it advances.
pub fn parse_verdict(reply: &str, current: usize, stages: usize) -> Result<Signal, AgentError> {
    let (keyword, rest) = keyword_reply(reply).ok_or_else(|| AgentError::SupervisorProtocol(reply.to_string()))?;
    let last = current + 1 == stages;
    let value = match keyword.as_str() {
        "CONTINUE" => SignalValue::Continue,
        "ADVANCE" if last => SignalValue::EndLesson,
        "ADVANCE" => SignalValue::AdvanceStage,
        "END" if last => SignalValue::EndLesson,
        "END" => SignalValue::AdvanceStage,
        _ => return Err(AgentError::SupervisorProtocol(reply.to_string())),
    };
    let rationale = if rest.is_empty() { keyword.to_ascii_lowercase() } else { rest };
    Ok(Signal { value, rationale })
}

static SCORE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?mi)^\s*SCORE:\s*(-?\d+)\s*$").expect("static regex"));
static REASON: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?mi)^\s*REASON:\s*(.+?)\s*$").expect("static regex"));

fn parse_willingness(reply: &str) -> Option<(u8, String)> {
    let score: i64 = SCORE.captures(reply)?.get(1)?.as_str().parse().ok()?;
    if !(1..=5).contains(&score) {
        return None;
    }
    let reason = REASON
        .captures(reply)
        .and_then(|c| c.get(1))
        .map(|m| m.as_str().to_string())
        .unwrap_or_default();
    Some((score as u8, reason))
}

impl GeneralAgent {
    pub fn new(backend: Backend) -> Self {
        Self {
            backend,
            sampling: Sampling::GENERAL,
        }
    }

    async fn ask(&self, op: &'static str, tag: &str, system: &str, prompt: String) -> Result<String, AgentError> {
        let request = LmRequest::single(tag, system, prompt, self.sampling);
        self.backend
            .complete(&request)
            .await
            .map(|r| r.text)
            .map_err(|source| AgentError::Backend { op, source })
    }

    pub async fn generate_plan(&self, topic: &str) -> Result<TeachingPlan, AgentError> {
        if topic.trim().is_empty() {
            return Err(AgentError::EmptyTopic);
        }
        let prompt = format!(
            "Write a teaching plan for a lesson on \"{topic}\".\n\
             Use exactly this format and write nothing else:\n\
             Topic: <topic>\n\
             Objectives:\n\
             - <objective>\n\
             Stages:\n\
             1. <stage name>: <what happens in the stage>\n   Criterion: <when the stage is complete>\n\
             Number the stages from 1."
        );
        let reply = self.ask("teaching_plan", tags::TEACHING_PLAN, PLANNER_SYSTEM, prompt).await?;
        TeachingPlan::parse(topic, &reply)
    }

    /// The stage signal from the plan, the stage list, the current stage and the
    /// recent classroom events, in that order.
    pub async fn supervise(
        &self,
        plan: &TeachingPlan,
        current: usize,
        recent: &[TranscriptEvent],
    ) -> Result<Signal, AgentError> {
        let stage = plan.stage(current).ok_or(AgentError::InvalidStage {
            index: current,
            len: plan.stages.len(),
        })?;
        let mut prompt = format!("## Teaching plan\n{}\n## Stages\n", plan.render());
        for (i, s) in plan.stages.iter().enumerate() {
            prompt.push_str(&format!("{}. {}\n", i + 1, s.name));
        }
        prompt.push_str(&format!(
            "\n## Current stage\nStage {} of {}: {}\nComplete when: {}\n\n## Recent classroom events\n{}\n\n",
            current + 1,
            plan.stages.len(),
            stage.name,
            stage.completion_criterion,
            render_events(recent, usize::MAX)
        ));
        prompt.push_str(
            "Is the current stage complete? Answer CONTINUE to stay in this stage, ADVANCE to move to the next stage, \
             or END to end the lesson. Put the keyword alone on the first line and a one-sentence rationale on the second.",
        );
        let reply = self.ask("supervisor", tags::SUPERVISOR, SUPERVISOR_SYSTEM, prompt).await?;
        parse_verdict(&reply, current, plan.stages.len())
    }

    pub async fn check_persona(&self, agent: &RoleAgent, draft: &str) -> Result<Verdict, AgentError> {
        if draft.trim().is_empty() {
            return Err(AgentError::EmptyDraft);
        }
        let prompt = format!(
            "## Persona\n{}\n## Draft line by {}\n{}\n\n\
             Does the draft fit this persona? Answer CONSISTENT, or INCONSISTENT followed by a short correction note.",
            agent.persona(),
            agent.id(),
            draft
        );
        let reply = self.ask("consistency", tags::CONSISTENCY, CHECKER_SYSTEM, prompt).await?;
        match keyword_reply(&reply) {
            Some((k, _)) if k == "CONSISTENT" => Ok(Verdict::Consistent),
            Some((k, note)) if k == "INCONSISTENT" && !note.is_empty() => Ok(Verdict::Inconsistent { note }),
            _ => Err(AgentError::ConsistencyProtocol(reply)),
        }
    }

    /// One call per student, issued concurrently; results keep roster order.
    /// An unreadable or out-of-range score is asked once more, then fails.
    pub async fn score_willingness(
        &self,
        students: &[&RoleAgent],
        question: &str,
        context: &str,
    ) -> Result<Vec<WillingnessScore>, AgentError> {
        if students.is_empty() {
            return Err(AgentError::NoStudents);
        }
        let calls = students.iter().map(|s| self.score_one(s, question, context));
        join_all(calls).await.into_iter().collect()
    }

    async fn score_one(&self, student: &RoleAgent, question: &str, context: &str) -> Result<WillingnessScore, AgentError> {
        let prompt = format!(
            "## Student\n{}\n## Persona\n{}\n## Question\n{}\n## Classroom dynamics\n{}\n\n\
             Considering the student's personality, the classroom dynamics and their grasp of the subject, \
             how willing is this student to answer? Answer `SCORE: <1-5>` on the first line and `REASON: <one sentence>` on the second.",
            student.id(),
            student.persona(),
            question,
            context
        );
        let mut reply = self.ask("willingness", tags::WILLINGNESS, WILLINGNESS_SYSTEM, prompt.clone()).await?;
        if parse_willingness(&reply).is_none() {
            let retry = format!("{prompt}\n\nYour previous answer could not be read. Follow the answer format exactly.");
            reply = self.ask("willingness", tags::WILLINGNESS, WILLINGNESS_SYSTEM, retry).await?;
        }
        let (score, rationale) = parse_willingness(&reply).ok_or_else(|| AgentError::WillingnessProtocol {
            agent: student.id().clone(),
            reply: reply.clone(),
        })?;
        Ok(WillingnessScore {
            agent: student.id().clone(),
            score,
            rationale,
        })
    }

    pub async fn classify(&self, roster: &[AgentId], line: &str) -> Result<Classification, AgentError> {
        let names: Vec<&str> = roster.iter().map(AgentId::as_str).collect();
        let prompt = format!(
            "## Students\n{}\n## Teacher line\n{}\n\n\
             Answer STATEMENT if the line is not a question, CLASS if it is a question for the whole class, \
             or STUDENT: <name> if it is a question for one student.",
            names.join(", "),
            line
        );
        let reply = self.ask("classify", tags::CLASSIFY, CLASSIFIER_SYSTEM, prompt).await?;
        match keyword_reply(&reply) {
            Some((k, _)) if k == "STATEMENT" => Ok(Classification::Statement),
            Some((k, _)) if k == "CLASS" => Ok(Classification::QuestionToClass),
            Some((k, name)) if k == "STUDENT" && !name.is_empty() => {
                Ok(Classification::QuestionToStudent(name.trim_end_matches(['.', '!', '?']).trim().to_string()))
            }
            _ => Err(AgentError::ClassifierProtocol(reply)),
        }
    }
}

/// The most willing student; ties go to the earliest roster position.
pub fn select_speaker(scores: &[WillingnessScore], roster: &[AgentId]) -> Result<AgentId, AgentError> {
    let mut best: Option<(u8, usize)> = None;
    for s in scores {
        let pos = roster
            .iter()
            .position(|a| a == &s.agent)
            .ok_or_else(|| AgentError::UnknownAgent(s.agent.clone()))?;
        let better = match best {
            None => true,
            Some((score, at)) => s.score > score || (s.score == score && pos < at),
        };
        if better {
            best = Some((s.score, pos));
        }
    }
    best.map(|(_, pos)| roster[pos].clone()).ok_or(AgentError::EmptyScores)
}

pub fn select_random<R: Rng + ?Sized>(roster: &[AgentId], rng: &mut R) -> Result<AgentId, AgentError> {
    roster.choose(rng).cloned().ok_or(AgentError::NoStudents)
}
