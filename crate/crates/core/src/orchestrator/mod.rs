//! Scenario loading and the staged lesson loop.
//!
//! Each teacher turn runs the teacher's cognitive cycle, passes the draft
//! through the persona checker, classifies it, and routes questions to a
//! student (named, most willing, or random). The supervisor then decides
//! whether the stage continues, advances, or the lesson ends. Everything that
//! happens is appended to the transcript as it happens.

mod config;
mod stage;
mod transcript;

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    select_random, select_speaker, AgentError, AgentId, AgentRole, Classification, GeneralAgent, GeneralAgents,
    RoleAgent, RoleAgentSettings, TeachingPlan, Verdict,
};
use crate::cognition::MemorySnapshot;
use crate::lm_backend::{Backend, Instrumented, Sampling};
use crate::scale::{consistency_check, CheckError};

pub use stage::{Cause, StageMachine, Step};
pub use config::{BackendConfig, BackendKind, Limits, LoadedConfig, Overrides, RetryConfig, ScenarioConfig};
pub use transcript::{
    check_invariants, parse_jsonl, read_transcript, render_events, to_jsonl, EventBody, PersonaAudit, SelectionMode,
    Speaker, Speech, SpeechRole, Termination, TranscriptError, TranscriptEvent, TranscriptWriter, SCHEMA,
    SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("{file}: field `{field}`: {message}")]
    Config { file: String, field: String, message: String },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("persona check: {0}")]
    Persona(#[from] CheckError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error("question is addressed to {0:?}, who is not in the roster")]
    Routing(String),
    #[error("the lesson has already ended")]
    Ended,
}

impl OrchestratorError {
    pub fn is_config(&self) -> bool {
        matches!(self, OrchestratorError::Config { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub events: usize,
    pub stages_completed: usize,
    pub backend_calls: BTreeMap<String, usize>,
    pub termination: Termination,
}

fn role_settings(config: &LoadedConfig, backend: Backend) -> Result<RoleAgentSettings, OrchestratorError> {
    Ok(RoleAgentSettings {
        backend,
        templates: Arc::new(config.templates()?),
        skills: Arc::new(config.skills()?),
        working_capacity: config.config.limits.working_memory_capacity,
        skill_k: config.config.limits.skill_k,
        distill_every: config.config.distill_every,
        sampling: Sampling::ROLE,
    })
}

/// Builds a single agent from a config, gives it its persona and probes every
/// scale with `m` coarse traits. Nothing else in the scenario is constructed.
pub async fn audit_agent(
    config: &LoadedConfig,
    name: &str,
    m: usize,
    seed: u64,
) -> Result<Vec<crate::scale::ConsistencyReport>, OrchestratorError> {
    let teacher = config.teacher_profile()?;
    let (profile, role) = if teacher.agent_name.eq_ignore_ascii_case(name) {
        (teacher, AgentRole::Teacher)
    } else {
        let students = config.student_profiles()?;
        let names: Vec<String> = std::iter::once(teacher.agent_name.clone())
            .chain(students.iter().map(|p| p.agent_name.clone()))
            .collect();
        match students.into_iter().find(|p| p.agent_name.eq_ignore_ascii_case(name)) {
            Some(p) => (p, AgentRole::Student),
            None => {
                return Err(config::config_error(
                    &config.path,
                    "agent",
                    format!("no agent named {name:?}; known agents: {}", names.join(", ")),
                ))
            }
        }
    };
    for tree in &profile.scales {
        let available = tree.coarse_nodes().len();
        if m > available {
            return Err(config::config_error(
                &config.path,
                "m",
                format!("{m} exceeds the {available} coarse traits of scale {:?}", tree.name()),
            ));
        }
    }
    let backend = config.backend(None)?;
    let mut agent = RoleAgent::new(profile, role, &role_settings(config, backend)?);
    agent.assign_persona();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();
    for tree in agent.profile().scales.clone() {
        reports.push(consistency_check(&mut agent, &tree, m, &mut rng).await?);
    }
    Ok(reports)
}

/// A loaded scenario: one teacher, a roster of students and the general
/// agents, all speaking through one instrumented backend.
pub struct Scenario {
    pub config: LoadedConfig,
    teacher: RoleAgent,
    students: Vec<RoleAgent>,
    general: GeneralAgents,
    calls: Arc<Instrumented>,
    audits: Vec<PersonaAudit>,
    rng: ChaCha8Rng,
}

impl Scenario {
    /// Reads a config file, applies overrides and builds the scenario.
    pub async fn load(path: &Path, overrides: &Overrides) -> Result<Self, OrchestratorError> {
        let mut loaded = LoadedConfig::read(path)?;
        loaded.apply(overrides)?;
        let backend = loaded.backend(overrides.record.as_deref())?;
        Self::build(loaded, backend).await
    }

    /// Constructs the agents, hands them their personas in depth-first order
    /// and runs the initial persona audit.
    pub async fn build(config: LoadedConfig, backend: Backend) -> Result<Self, OrchestratorError> {
        let calls = Arc::new(Instrumented::new(backend));
        let shared: Backend = calls.clone();
        let settings = role_settings(&config, shared.clone())?;
        let mut teacher = RoleAgent::new(config.teacher_profile()?, AgentRole::Teacher, &settings);
        let mut students: Vec<RoleAgent> = config
            .student_profiles()?
            .into_iter()
            .map(|p| RoleAgent::new(p, AgentRole::Student, &settings))
            .collect();

        let mut seen = vec![teacher.id().clone()];
        for (i, s) in students.iter().enumerate() {
            if seen.contains(s.id()) {
                return Err(config::config_error(&config.path, &format!("students[{i}]"), format!("duplicate agent name {}", s.id())));
            }
            seen.push(s.id().clone());
        }

        if let Some(path) = &config.config.memory_import {
            let full = config.resolve(path);
            let text = std::fs::read_to_string(&full).map_err(|e| config::config_error(&config.path, "memory_import", e))?;
            let snapshots: BTreeMap<String, MemorySnapshot> =
                serde_json::from_str(&text).map_err(|e| config::config_error(&full, "(document)", e))?;
            for agent in std::iter::once(&mut teacher).chain(students.iter_mut()) {
                if let Some(snapshot) = snapshots.get(agent.id().as_str()) {
                    agent.cognition_mut().import(snapshot);
                }
            }
        }

        let m = config.config.persona_check_m;
        for agent in std::iter::once(&teacher).chain(students.iter()) {
            for tree in &agent.profile().scales {
                let available = tree.coarse_nodes().len();
                if m > available {
                    return Err(config::config_error(
                        &config.path,
                        "persona_check_m",
                        format!("{m} exceeds the {available} coarse traits of {}'s scale {:?}", agent.id(), tree.name()),
                    ));
                }
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.config.seed);
        let mut audits = Vec::new();
        for agent in std::iter::once(&mut teacher).chain(students.iter_mut()) {
            agent.assign_persona();
            if m == 0 {
                continue;
            }
            for tree in agent.profile().scales.clone() {
                let report = consistency_check(agent, &tree, m, &mut rng).await?;
                audits.push(PersonaAudit {
                    agent: agent.id().clone(),
                    report,
                });
            }
        }

        Ok(Self {
            config,
            teacher,
            students,
            general: GeneralAgents::shared(shared),
            calls,
            audits,
            rng,
        })
    }

    pub fn teacher(&self) -> &RoleAgent {
        &self.teacher
    }

    pub fn students(&self) -> &[RoleAgent] {
        &self.students
    }

    pub fn roster(&self) -> Vec<AgentId> {
        self.students.iter().map(|s| s.id().clone()).collect()
    }

    pub fn audits(&self) -> &[PersonaAudit] {
        &self.audits
    }

    pub fn calls(&self) -> &Instrumented {
        &self.calls
    }

    /// Replaces general agents, e.g. to give the willingness scorer its own backend.
    pub fn general_mut(&mut self) -> &mut GeneralAgents {
        &mut self.general
    }

    pub fn agent(&self, id: &str) -> Option<&RoleAgent> {
        std::iter::once(&self.teacher)
            .chain(self.students.iter())
            .find(|a| a.id().as_str() == id)
    }

    /// Each agent's memory, keyed by name, for the next lesson's `memory_import`.
    pub fn export_memory(&self) -> BTreeMap<String, MemorySnapshot> {
        std::iter::once(&self.teacher)
            .chain(self.students.iter())
            .map(|a| (a.id().to_string(), a.cognition().export()))
            .collect()
    }

    fn resolve_student(&self, name: &str) -> Result<AgentId, OrchestratorError> {
        let wanted = name.trim();
        self.students
            .iter()
            .map(RoleAgent::id)
            .find(|id| id.as_str().eq_ignore_ascii_case(wanted))
            .cloned()
            .ok_or_else(|| OrchestratorError::Routing(wanted.to_string()))
    }

    /// Runs the whole lesson without interruption.
    pub async fn run_lesson(&mut self, out: &mut TranscriptWriter) -> Result<RunReport, OrchestratorError> {
        let mut lesson = self.start(out).await?;
        while lesson.machine.ended().is_none() {
            self.teacher_turn(&mut lesson, out).await?;
        }
        Ok(self.report(&lesson, out))
    }

    fn report(&self, lesson: &Lesson, out: &TranscriptWriter) -> RunReport {
        RunReport {
            events: out.events().len(),
            stages_completed: lesson.machine.stages_completed(),
            backend_calls: self.calls.counts(),
            termination: lesson.machine.ended().expect("lesson finished"),
        }
    }

    async fn start(&mut self, out: &mut TranscriptWriter) -> Result<Lesson, OrchestratorError> {
        let topic = self.config.config.topic.clone();
        let plan = self.general.planner.generate_plan(&topic).await?;
        out.emit(
            0,
            Speaker::System,
            EventBody::LessonStart {
                topic: topic.clone(),
                teacher: self.teacher.id().clone(),
                roster: self.roster(),
                selection_mode: self.config.config.selection_mode,
                plan: plan.clone(),
                persona_audits: self.audits.clone(),
            },
        )?;
        let mut lesson = Lesson {
            machine: StageMachine::new(plan.stages.len(), &self.config.config.limits),
            plan,
            turn: 0,
            stage_start: out.events().len(),
            cursors: HashMap::new(),
            teacher_notes: vec![format!("Lesson topic: {topic}.")],
        };
        lesson.note_stage();
        Ok(lesson)
    }

    async fn teacher_turn(&mut self, lesson: &mut Lesson, out: &mut TranscriptWriter) -> Result<(), OrchestratorError> {
        if lesson.machine.ended().is_some() {
            return Err(OrchestratorError::Ended);
        }
        lesson.turn += 1;
        let turn = lesson.turn;
        let notes = std::mem::take(&mut lesson.teacher_notes);
        observe(&mut self.teacher, lesson, out.events(), turn, notes)?;
        let draft = self.teacher.cycle(turn).await?;
        let line = gate(&self.general.checker, &mut self.teacher, turn, draft, out).await?;

        let classification = self.general.classifier.classify(&self.roster(), &line).await?;
        let target = match &classification {
            Classification::QuestionToStudent(name) => Some(self.resolve_student(name)?),
            _ => None,
        };
        let speech = Speech {
            role: SpeechRole::Teacher,
            text: line.clone(),
            stage: lesson.stage(),
            target: target.clone(),
        };
        let teacher = Speaker::Agent(self.teacher.id().clone());
        match classification {
            Classification::Statement => out.emit(turn, teacher, EventBody::Utterance(speech))?,
            Classification::QuestionToClass => out.emit(turn, teacher, EventBody::QuestionToClass(speech))?,
            Classification::QuestionToStudent(_) => out.emit(turn, teacher, EventBody::QuestionToStudent(speech))?,
        };
        if classification != Classification::Statement {
            let name = target.as_ref().map(AgentId::to_string);
            let next = self.route_question(lesson, out, name.as_deref(), &line).await?;
            self.student_turn(lesson, out, &next).await?;
        }

        let recent = recent_window(out.events(), lesson.stage_start, self.config.config.limits.context_window);
        let signal = self.general.supervisor.supervise(&lesson.plan, lesson.stage(), recent).await?;
        out.emit(
            turn,
            Speaker::System,
            EventBody::Signal {
                value: signal.value,
                rationale: signal.rationale.clone(),
                stage: lesson.stage(),
            },
        )?;
        let step = lesson.machine.on_signal(signal.value);
        apply(lesson, out, step, &signal.rationale)
    }

    /// Picks who answers a question. A named student answers directly; a
    /// class question goes to the most willing student or a random one.
    pub async fn route_question(
        &mut self,
        lesson: &Lesson,
        out: &mut TranscriptWriter,
        target: Option<&str>,
        question: &str,
    ) -> Result<AgentId, OrchestratorError> {
        if let Some(name) = target {
            return self.resolve_student(name);
        }
        let roster = self.roster();
        let mode = self.config.config.selection_mode;
        let chosen = match mode {
            SelectionMode::Willingness => {
                let context = render_events(out.events(), self.config.config.limits.context_window);
                let students: Vec<&RoleAgent> = self.students.iter().collect();
                let scores = self.general.willingness.score_willingness(&students, question, &context).await?;
                out.emit(
                    lesson.turn,
                    Speaker::System,
                    EventBody::WillingnessScores {
                        question: question.to_string(),
                        scores: scores.clone(),
                    },
                )?;
                select_speaker(&scores, &roster)?
            }
            SelectionMode::Random => select_random(&roster, &mut self.rng)?,
        };
        out.emit(
            lesson.turn,
            Speaker::System,
            EventBody::Selection {
                agent: chosen.clone(),
                mode,
            },
        )?;
        Ok(chosen)
    }

    async fn student_turn(&mut self, lesson: &mut Lesson, out: &mut TranscriptWriter, id: &AgentId) -> Result<(), OrchestratorError> {
        let turn = lesson.turn;
        let index = self
            .students
            .iter()
            .position(|s| s.id() == id)
            .ok_or_else(|| OrchestratorError::Routing(id.to_string()))?;
        let student = &mut self.students[index];
        observe(student, lesson, out.events(), turn, Vec::new())?;
        let draft = student.cycle(turn).await?;
        let line = gate(&self.general.checker, student, turn, draft, out).await?;
        out.emit(
            turn,
            Speaker::Agent(id.clone()),
            EventBody::Utterance(Speech {
                role: SpeechRole::Student,
                text: line,
                stage: lesson.stage(),
                target: None,
            }),
        )?;
        Ok(())
    }

    /// Runs the lesson under human control. Commands are read one line at a
    /// time at turn boundaries; when the command stream ends the lesson runs
    /// on by itself.
    pub async fn interactive_session(
        &mut self,
        out: &mut TranscriptWriter,
        commands: &mut dyn BufRead,
        console: &mut dyn Write,
    ) -> Result<RunReport, OrchestratorError> {
        let mut lesson = self.start(out).await?;
        let mut paused = false;
        let mut exhausted = false;
        let _ = writeln!(console, "{HELP}");
        while lesson.machine.ended().is_none() {
            if exhausted {
                self.teacher_turn(&mut lesson, out).await?;
                continue;
            }
            let _ = write!(
                console,
                "[turn {} | stage {}/{}: {}{}] > ",
                lesson.turn + 1,
                lesson.stage() + 1,
                lesson.plan.stages.len(),
                lesson.plan.stages[lesson.stage()].name,
                if paused { " | paused" } else { "" }
            );
            let _ = console.flush();
            let mut raw = String::new();
            let read = commands.read_line(&mut raw).map_err(TranscriptError::Io)?;
            if read == 0 {
                exhausted = true;
                let _ = writeln!(console, "\n(end of commands; running the rest of the lesson)");
                continue;
            }
            let line = raw.trim();
            let command = match parse_command(line, &self.roster()) {
                Ok(c) => c,
                Err(message) => {
                    let _ = writeln!(console, "{message}\n{HELP}");
                    continue;
                }
            };
            match command {
                Command::Help => {
                    let _ = writeln!(console, "{HELP}");
                }
                Command::Next(_) | Command::Advance | Command::Ask(..) if paused => {
                    let _ = writeln!(console, "paused; type `resume` first");
                }
                Command::Inspect(name) => match self.agent(&name) {
                    Some(agent) => {
                        log_command(&lesson, out, line)?;
                        let _ = writeln!(console, "{}", inspect(agent));
                    }
                    None => {
                        let _ = writeln!(console, "no agent named {name:?}");
                    }
                },
                Command::Pause => {
                    log_command(&lesson, out, line)?;
                    paused = true;
                }
                Command::Resume => {
                    log_command(&lesson, out, line)?;
                    paused = false;
                }
                Command::Next(n) => {
                    log_command(&lesson, out, line)?;
                    for _ in 0..n {
                        if lesson.machine.ended().is_some() {
                            break;
                        }
                        self.teacher_turn(&mut lesson, out).await?;
                        print_turn(console, out.events(), lesson.turn);
                    }
                }
                Command::Advance => {
                    log_command(&lesson, out, line)?;
                    let step = lesson.machine.user_advance();
                    apply(&mut lesson, out, step, "user command")?;
                }
                Command::End => {
                    log_command(&lesson, out, line)?;
                    let step = lesson.machine.user_end();
                    apply(&mut lesson, out, step, "user command")?;
                }
                Command::Ask(student, question) => {
                    log_command(&lesson, out, line)?;
                    lesson.turn += 1;
                    out.emit(
                        lesson.turn,
                        Speaker::User,
                        EventBody::QuestionToStudent(Speech {
                            role: SpeechRole::User,
                            text: question,
                            stage: lesson.stage(),
                            target: Some(student.clone()),
                        }),
                    )?;
                    self.student_turn(&mut lesson, out, &student).await?;
                    print_turn(console, out.events(), lesson.turn);
                }
            }
        }
        Ok(self.report(&lesson, out))
    }
}

/// Progress of one lesson.
pub struct Lesson {
    pub plan: TeachingPlan,
    pub machine: StageMachine,
    pub turn: u64,
    stage_start: usize,
    cursors: HashMap<AgentId, usize>,
    teacher_notes: Vec<String>,
}

impl Lesson {
    pub fn stage(&self) -> usize {
        self.machine.stage()
    }

    fn note_stage(&mut self) {
        let stage = &self.plan.stages[self.stage()];
        self.teacher_notes.push(format!(
            "Stage {}/{}: {}. {} Complete when: {}",
            self.stage() + 1,
            self.plan.stages.len(),
            stage.name,
            stage.description,
            stage.completion_criterion
        ));
    }
}

/// Feeds an agent everything said since it last looked, plus `notes`.
fn observe(
    agent: &mut RoleAgent,
    lesson: &mut Lesson,
    events: &[TranscriptEvent],
    turn: u64,
    notes: Vec<String>,
) -> Result<(), OrchestratorError> {
    let cursor = lesson.cursors.entry(agent.id().clone()).or_insert(0);
    let mut seen: Vec<String> = events[*cursor..].iter().filter_map(TranscriptEvent::speech_line).collect();
    *cursor = events.len();
    seen.extend(notes);
    if seen.is_empty() {
        seen.push("(no one has spoken since your last turn)".into());
    }
    for line in seen {
        agent.perceive(turn, &line)?;
    }
    Ok(())
}

/// Checks a draft against the speaker's persona. An inconsistent draft is
/// regenerated once with the checker's note; the second draft is used even if
/// it also fails, with a warning.
async fn gate(
    checker: &GeneralAgent,
    agent: &mut RoleAgent,
    turn: u64,
    draft: String,
    out: &mut TranscriptWriter,
) -> Result<String, OrchestratorError> {
    let mut text = draft;
    for attempt in 1..=2u32 {
        let verdict = checker.check_persona(agent, &text).await?;
        let note = match &verdict {
            Verdict::Consistent => None,
            Verdict::Inconsistent { note } => Some(note.clone()),
        };
        out.emit(
            turn,
            Speaker::System,
            EventBody::PersonaCheck {
                agent: agent.id().clone(),
                attempt,
                consistent: note.is_none(),
                note: note.clone(),
                draft: text.clone(),
            },
        )?;
        match note {
            None => break,
            Some(_) if attempt == 2 => {
                tracing::warn!(agent = %agent.id(), "draft still inconsistent after regeneration; keeping it");
            }
            Some(note) => text = agent.regenerate(turn, &note).await?,
        }
    }
    Ok(text)
}

/// Writes the events for a machine step: a stage transition, an ending, or both.
fn apply(lesson: &mut Lesson, out: &mut TranscriptWriter, step: Step, rationale: &str) -> Result<(), OrchestratorError> {
    if let Some((from, to, cause)) = step.advanced {
        let rationale = match cause {
            Cause::Supervisor | Cause::User => rationale,
            Cause::StageCap => "max_stage_turns reached",
        };
        out.emit(
            lesson.turn,
            Speaker::System,
            EventBody::StageTransition {
                from,
                to,
                stage: lesson.plan.stages[to].name.clone(),
                rationale: rationale.to_string(),
            },
        )?;
        lesson.stage_start = out.events().len();
        lesson.note_stage();
    }
    if let Some(termination) = step.ended {
        out.emit(
            lesson.turn,
            Speaker::System,
            EventBody::LessonEnd {
                termination,
                stages_completed: lesson.machine.stages_completed(),
            },
        )?;
    }
    Ok(())
}

/// The events from `from` on, trimmed so at most `window` speech events remain.
fn recent_window(events: &[TranscriptEvent], from: usize, window: usize) -> &[TranscriptEvent] {
    let tail = &events[from.min(events.len())..];
    let mut speech = 0;
    for (i, e) in tail.iter().enumerate().rev() {
        if e.body.speech().is_some() {
            speech += 1;
            if speech == window {
                return &tail[i..];
            }
        }
    }
    tail
}

fn log_command(lesson: &Lesson, out: &mut TranscriptWriter, line: &str) -> Result<(), OrchestratorError> {
    out.emit(
        lesson.turn,
        Speaker::User,
        EventBody::UserCommand {
            command: line.to_string(),
        },
    )?;
    Ok(())
}

fn print_turn(console: &mut dyn Write, events: &[TranscriptEvent], turn: u64) {
    for e in events.iter().filter(|e| e.turn == turn) {
        if let Some(line) = e.speech_line() {
            let _ = writeln!(console, "{line}");
        }
    }
}

fn inspect(agent: &RoleAgent) -> String {
    let c = agent.cognition();
    let last = |v: Option<&str>| v.filter(|s| !s.is_empty()).unwrap_or("(none)").to_string();
    format!(
        "{}\n\nworking memory: {} entries; declarative: {}; procedural: {}; cycles: {}\n\
         latest declarative: {}\nlatest procedural: {}\nlast reflection: {}\nlast plan: {}",
        agent.system_prompt(),
        c.working().len(),
        c.declarative().len(),
        c.procedural().len(),
        c.cycles(),
        last(c.declarative().last().map(|e| e.content.as_str())),
        last(c.procedural().last().map(|e| e.content.as_str())),
        last(c.last_reflection().map(|s| s.text.as_str())),
        last(c.last_plan().map(|s| s.text.as_str())),
    )
}

pub const HELP: &str = "commands: next [n] | advance | end | ask <student> <question> | pause | resume | inspect <agent> | help";

#[derive(Debug, Clone, PartialEq, Eq)]
enum Command {
    Next(usize),
    Advance,
    End,
    Ask(AgentId, String),
    Pause,
    Resume,
    Inspect(String),
    Help,
}

fn parse_command(line: &str, roster: &[AgentId]) -> Result<Command, String> {
    let (word, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    let rest = rest.trim();
    match (word.to_ascii_lowercase().as_str(), rest.is_empty()) {
        ("" | "next", _) if rest.is_empty() => Ok(Command::Next(1)),
        ("next", false) => rest
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .map(Command::Next)
            .ok_or_else(|| format!("`next` takes a positive count, got {rest:?}")),
        ("advance", true) => Ok(Command::Advance),
        ("end", true) => Ok(Command::End),
        ("pause", true) => Ok(Command::Pause),
        ("resume", true) => Ok(Command::Resume),
        ("help", true) => Ok(Command::Help),
        ("inspect", false) => Ok(Command::Inspect(rest.to_string())),
        ("ask", false) => {
            // Longest roster name that prefixes the rest, so "Ying Zheng" wins over "Ying".
            let student = roster
                .iter()
                .filter(|id| {
                    rest.len() > id.as_str().len()
                        && rest.is_char_boundary(id.as_str().len())
                        && rest[..id.as_str().len()].eq_ignore_ascii_case(id.as_str())
                        && rest[id.as_str().len()..].starts_with(char::is_whitespace)
                })
                .max_by_key(|id| id.as_str().len())
                .ok_or_else(|| format!("`ask` needs a student from the roster and a question: {rest:?}"))?;
            let question = rest[student.as_str().len()..].trim();
            Ok(Command::Ask(student.clone(), question.to_string()))
        }
        _ => Err(format!("unknown command {line:?}")),
    }
}
