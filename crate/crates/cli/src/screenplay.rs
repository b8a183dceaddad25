//! Plain-text rendering of a transcript.

use std::fmt::Write;

use cgmi_core::orchestrator::{EventBody, Speaker, TranscriptEvent};

pub fn render(events: &[TranscriptEvent]) -> String {
    let mut out = String::new();
    for event in events {
        match &event.body {
            EventBody::LessonStart {
                topic,
                teacher,
                roster,
                plan,
                ..
            } => {
                let students: Vec<&str> = roster.iter().map(|a| a.as_str()).collect();
                let _ = writeln!(out, "LESSON: {topic}");
                let _ = writeln!(out, "Teacher: {teacher}. Students: {}.", students.join(", "));
                if let Some(first) = plan.stages.first() {
                    let _ = writeln!(out, "\n== Stage 1: {} ==", first.name);
                }
            }
            EventBody::Utterance(s) | EventBody::QuestionToClass(s) | EventBody::QuestionToStudent(s) => {
                let name = match &event.speaker {
                    Speaker::Agent(id) => id.to_string(),
                    Speaker::User => "USER".into(),
                    Speaker::System => "SYSTEM".into(),
                };
                match &s.target {
                    Some(t) => {
                        let _ = writeln!(out, "\n{name} (to {t}):\n    {}", s.text);
                    }
                    None => {
                        let _ = writeln!(out, "\n{name}:\n    {}", s.text);
                    }
                }
            }
            EventBody::Selection { agent, mode } => {
                let _ = writeln!(out, "    [{agent} is called on, {mode:?} selection]");
            }
            EventBody::PersonaCheck {
                agent,
                consistent: false,
                note,
                ..
            } => {
                let _ = writeln!(out, "    [{agent} redrafts: {}]", note.as_deref().unwrap_or("out of character"));
            }
            EventBody::StageTransition { to, stage, rationale, .. } => {
                let _ = writeln!(out, "\n== Stage {}: {stage} ({rationale}) ==", to + 1);
            }
            EventBody::UserCommand { command } => {
                let _ = writeln!(out, "    [user: {command}]");
            }
            EventBody::LessonEnd {
                termination,
                stages_completed,
            } => {
                let _ = writeln!(out, "\nEND ({termination:?}, {stages_completed} stages completed)");
            }
            _ => {}
        }
    }
    out
}
