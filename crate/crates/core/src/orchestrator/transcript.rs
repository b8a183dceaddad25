use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentId, SignalValue, TeachingPlan, WillingnessScore};
use crate::scale::ConsistencyReport;

pub const SCHEMA: &str = "cgmi-transcript";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Speaker {
    System,
    User,
    Agent(AgentId),
}

impl From<String> for Speaker {
    fn from(s: String) -> Self {
        match s.as_str() {
            "system" => Speaker::System,
            "user" => Speaker::User,
            _ => Speaker::Agent(AgentId::new(s)),
        }
    }
}

impl From<Speaker> for String {
    fn from(s: Speaker) -> Self {
        match s {
            Speaker::System => "system".into(),
            Speaker::User => "user".into(),
            Speaker::Agent(id) => id.to_string(),
        }
    }
}

impl Speaker {
    pub fn agent(&self) -> Option<&AgentId> {
        match self {
            Speaker::Agent(id) => Some(id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeechRole {
    Teacher,
    Student,
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    Willingness,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    SupervisorEnd,
    MaxTurns,
    UserEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Speech {
    pub role: SpeechRole,
    pub text: String,
    pub stage: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<AgentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaAudit {
    pub agent: AgentId,
    pub report: ConsistencyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    LessonStart {
        topic: String,
        teacher: AgentId,
        roster: Vec<AgentId>,
        selection_mode: SelectionMode,
        plan: TeachingPlan,
        persona_audits: Vec<PersonaAudit>,
    },
    Utterance(Speech),
    QuestionToClass(Speech),
    QuestionToStudent(Speech),
    WillingnessScores {
        question: String,
        scores: Vec<WillingnessScore>,
    },
    Selection {
        agent: AgentId,
        mode: SelectionMode,
    },
    PersonaCheck {
        agent: AgentId,
        attempt: u32,
        consistent: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
        draft: String,
    },
    Signal {
        value: SignalValue,
        rationale: String,
        stage: usize,
    },
    StageTransition {
        from: usize,
        to: usize,
        stage: String,
        rationale: String,
    },
    LessonEnd {
        termination: Termination,
        stages_completed: usize,
    },
    UserCommand {
        command: String,
    },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::LessonStart { .. } => "lesson_start",
            EventBody::Utterance(_) => "utterance",
            EventBody::QuestionToClass(_) => "question_to_class",
            EventBody::QuestionToStudent(_) => "question_to_student",
            EventBody::WillingnessScores { .. } => "willingness_scores",
            EventBody::Selection { .. } => "selection",
            EventBody::PersonaCheck { .. } => "persona_check",
            EventBody::Signal { .. } => "signal",
            EventBody::StageTransition { .. } => "stage_transition",
            EventBody::LessonEnd { .. } => "lesson_end",
            EventBody::UserCommand { .. } => "user_command",
        }
    }

    pub fn speech(&self) -> Option<&Speech> {
        match self {
            EventBody::Utterance(s) | EventBody::QuestionToClass(s) | EventBody::QuestionToStudent(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub index: u64,
    pub turn: u64,
    pub speaker: Speaker,
    #[serde(flatten)]
    pub body: EventBody,
}

impl TranscriptEvent {
    /// "Name: text" for speech events, the form agents perceive.
    pub fn speech_line(&self) -> Option<String> {
        let speech = self.body.speech()?;
        Some(match (&self.speaker, &speech.target) {
            (Speaker::Agent(id), _) => format!("{id}: {}", speech.text),
            (_, Some(target)) => format!("(question for {target}) {}", speech.text),
            (_, None) => speech.text.clone(),
        })
    }
}

/// Renders the speech among `events`, one line each, keeping the last `limit`.
pub fn render_events(events: &[TranscriptEvent], limit: usize) -> String {
    let lines: Vec<String> = events.iter().filter_map(TranscriptEvent::speech_line).collect();
    let start = lines.len().saturating_sub(limit);
    if lines.len() == start {
        return "(nothing said yet)".into();
    }
    lines[start..].join("\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("transcript i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("transcript line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("transcript is empty")]
    Empty,
}

/// Append-only event log. With a file attached, every event is written and
/// flushed as it is emitted, so an aborted run leaves its evidence behind.
pub struct TranscriptWriter {
    events: Vec<TranscriptEvent>,
    file: Option<BufWriter<File>>,
}

impl Default for TranscriptWriter {
    fn default() -> Self {
        Self::in_memory()
    }
}

fn header_line() -> String {
    serde_json::to_string(&Header {
        schema: SCHEMA.into(),
        version: SCHEMA_VERSION,
    })
    .expect("header serializes")
}

impl TranscriptWriter {
    pub fn in_memory() -> Self {
        Self {
            events: Vec::new(),
            file: None,
        }
    }

    pub fn to_file(path: &Path) -> Result<Self, TranscriptError> {
        let mut file = BufWriter::new(File::create(path)?);
        writeln!(file, "{}", header_line())?;
        file.flush()?;
        Ok(Self {
            events: Vec::new(),
            file: Some(file),
        })
    }

    pub fn emit(&mut self, turn: u64, speaker: Speaker, body: EventBody) -> Result<&TranscriptEvent, TranscriptError> {
        let event = TranscriptEvent {
            index: self.events.len() as u64,
            turn,
            speaker,
            body,
        };
        if let Some(file) = &mut self.file {
            writeln!(file, "{}", serde_json::to_string(&event).expect("event serializes"))?;
            file.flush()?;
        }
        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<TranscriptEvent> {
        self.events
    }
}

/// Serializes events as JSONL with the header line first.
pub fn to_jsonl(events: &[TranscriptEvent]) -> String {
    let mut out = header_line();
    out.push('\n');
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str) -> Result<Vec<TranscriptEvent>, TranscriptError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(TranscriptError::Empty)?;
    let header: Header = serde_json::from_str(first).map_err(|e| TranscriptError::Malformed {
        line: 1,
        message: format!("bad header: {e}"),
    })?;
    if header.schema != SCHEMA || header.version != SCHEMA_VERSION {
        return Err(TranscriptError::Malformed {
            line: 1,
            message: format!("unsupported schema {} v{}", header.schema, header.version),
        });
    }
    let mut events = Vec::new();
    for (i, line) in lines {
        let event: TranscriptEvent = serde_json::from_str(line).map_err(|e| TranscriptError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        if event.index != events.len() as u64 {
            return Err(TranscriptError::Malformed {
                line: i + 1,
                message: format!("expected index {}, found {}", events.len(), event.index),
            });
        }
        events.push(event);
    }
    Ok(events)
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEvent>, TranscriptError> {
    parse_jsonl(&std::fs::read_to_string(path)?)
}

/// Structural checks that hold for every well-formed run. Returns one message
/// per violation.
pub fn check_invariants(events: &[TranscriptEvent]) -> Vec<String> {
    let mut problems = Vec::new();
    for (i, e) in events.iter().enumerate() {
        if e.index != i as u64 {
            problems.push(format!("event {i} has index {}", e.index));
        }
    }
    let starts = events.iter().filter(|e| matches!(e.body, EventBody::LessonStart { .. })).count();
    let ends = events.iter().filter(|e| matches!(e.body, EventBody::LessonEnd { .. })).count();
    if starts != 1 {
        problems.push(format!("{starts} lesson_start events"));
    }
    if ends > 1 {
        problems.push(format!("{ends} lesson_end events"));
    }
    if ends == 1 && !matches!(events.last().map(|e| &e.body), Some(EventBody::LessonEnd { .. })) {
        problems.push("lesson_end is not the last event".into());
    }

    let stage_names: Vec<String> = events
        .iter()
        .find_map(|e| match &e.body {
            EventBody::LessonStart { plan, .. } => Some(plan.stages.iter().map(|s| s.name.clone()).collect()),
            _ => None,
        })
        .unwrap_or_default();
    let mut stage = 0usize;
    let mut last_turn = 0u64;
    for e in events {
        if e.turn < last_turn {
            problems.push(format!("event {} goes back to turn {}", e.index, e.turn));
        }
        last_turn = e.turn;
        match &e.body {
            EventBody::StageTransition { from, to, stage: name, .. } => {
                if *from != stage || *to != stage + 1 {
                    problems.push(format!("event {}: transition {from}->{to} while at stage {stage}", e.index));
                }
                if stage_names.get(*to) != Some(name) {
                    problems.push(format!("event {}: unknown stage {name:?}", e.index));
                }
                stage = *to;
            }
            EventBody::Signal { stage: s, .. } if *s != stage => {
                problems.push(format!("event {}: signal at stage {s}, expected {stage}", e.index));
            }
            _ => {}
        }
        if let Some(speech) = e.body.speech() {
            if speech.stage != stage {
                problems.push(format!("event {}: speech at stage {}, expected {stage}", e.index, speech.stage));
            }
        }
    }

    // Every role-agent utterance follows a persona check of the same text,
    // by the same agent, in the same turn.
    for (i, e) in events.iter().enumerate() {
        let (Some(speech), Some(agent)) = (e.body.speech(), e.speaker.agent()) else {
            continue;
        };
        let checked = events[..i].iter().rev().take_while(|p| p.turn == e.turn && p.body.speech().is_none()).any(|p| {
            matches!(&p.body, EventBody::PersonaCheck { agent: a, draft, .. } if a == agent && draft == &speech.text)
        });
        if !checked {
            problems.push(format!("event {}: utterance by {agent} without a persona check", e.index));
        }
    }

    // Selection events must agree with their mode: willingness scores since
    // the last class question exactly when mode = willingness.
    for (i, e) in events.iter().enumerate() {
        let EventBody::Selection { mode, .. } = &e.body else {
            continue;
        };
        let mut scored = false;
        let mut asked = false;
        for p in events[..i].iter().rev() {
            if p.turn != e.turn {
                break;
            }
            match &p.body {
                EventBody::WillingnessScores { .. } => scored = true,
                EventBody::QuestionToClass(_) => {
                    asked = true;
                    break;
                }
                _ => {}
            }
        }
        if !asked {
            problems.push(format!("event {}: selection without a class question", e.index));
        }
        if scored != (*mode == SelectionMode::Willingness) {
            problems.push(format!("event {}: selection mode {mode:?} but willingness scored = {scored}", e.index));
        }
    }
    problems
}
