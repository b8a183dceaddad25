use std::path::{Path, PathBuf};

use cgmi_core::agents::{AgentId, SignalValue};
use cgmi_core::orchestrator::{
    check_invariants, to_jsonl, EventBody, Overrides, Scenario, SelectionMode, Speaker, Termination, TranscriptWriter,
};

fn demo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo/scenario.json")
}

async fn run(overrides: Overrides) -> (Vec<cgmi_core::orchestrator::TranscriptEvent>, cgmi_core::orchestrator::RunReport) {
    let mut scenario = Scenario::load(&demo(), &overrides).await.expect("demo loads");
    let mut out = TranscriptWriter::in_memory();
    let report = scenario.run_lesson(&mut out).await.expect("demo runs");
    (out.into_events(), report)
}

#[tokio::test]
async fn demo_lesson_end_to_end() {
    let (events, report) = run(Overrides::default()).await;
    assert_eq!(check_invariants(&events), Vec::<String>::new());
    assert_eq!(report.termination, Termination::SupervisorEnd);
    assert_eq!(report.stages_completed, 3);
    let boundaries = events
        .iter()
        .filter(|e| matches!(e.body, EventBody::StageTransition { .. } | EventBody::LessonEnd { .. }))
        .count();
    assert_eq!(boundaries, 3);

    let selections: Vec<&AgentId> = events
        .iter()
        .filter_map(|e| match &e.body {
            EventBody::Selection { agent, .. } => Some(agent),
            _ => None,
        })
        .collect();
    assert_eq!(selections, [&AgentId::new("Emily"), &AgentId::new("Ryan")]);

    let after_named = events
        .iter()
        .skip_while(|e| !matches!(&e.body, EventBody::QuestionToStudent(s) if s.text.starts_with("Ying Zheng, can you")))
        .find(|e| matches!(e.body, EventBody::Utterance(_)))
        .unwrap();
    assert_eq!(after_named.speaker, Speaker::Agent(AgentId::new("Ying Zheng")));

    let regenerated = events.iter().filter(|e| matches!(&e.body, EventBody::PersonaCheck { attempt: 2, .. })).count();
    assert_eq!(regenerated, 1);
    let signals = events.iter().filter(|e| matches!(e.body, EventBody::Signal { .. })).count();
    assert_eq!(signals, 6);
    assert!(events.iter().any(|e| matches!(&e.body, EventBody::Signal { value: SignalValue::EndLesson, .. })));
    match &events[0].body {
        EventBody::LessonStart { roster, persona_audits, .. } => {
            assert_eq!(roster.len(), 5);
            assert_eq!(persona_audits.len(), 12);
            assert!(persona_audits.iter().all(|a| !a.report.restored));
        }
        other => panic!("first event is {other:?}"),
    }
}

#[tokio::test]
async fn max_turns_one() {
    let mut scenario = Scenario::load(&demo(), &Overrides::default()).await.unwrap();
    scenario.config.config.limits.max_turns = 1;
    let mut out = TranscriptWriter::in_memory();
    let report = scenario.run_lesson(&mut out).await.unwrap();
    assert_eq!(report.termination, Termination::MaxTurns);
    let teacher_lines = out.events().iter().filter(|e| e.speaker == Speaker::Agent(AgentId::new("Mrs. Smith"))).count();
    assert_eq!(teacher_lines, 1);
}

#[tokio::test]
async fn random_mode_is_seeded_and_skips_scoring() {
    let overrides = Overrides {
        selection_mode: Some(SelectionMode::Random),
        seed: Some(7),
        ..Overrides::default()
    };
    let (a, _) = run(overrides.clone()).await;
    let (b, _) = run(overrides).await;
    assert_eq!(to_jsonl(&a), to_jsonl(&b));
    assert!(!a.iter().any(|e| matches!(e.body, EventBody::WillingnessScores { .. })));
    assert_eq!(check_invariants(&a), Vec::<String>::new());
}

async fn steer(script: &str) -> (Vec<cgmi_core::orchestrator::TranscriptEvent>, cgmi_core::orchestrator::RunReport, String) {
    let mut scenario = Scenario::load(&demo(), &Overrides::default()).await.expect("demo loads");
    let mut out = TranscriptWriter::in_memory();
    let mut console = Vec::new();
    let report = scenario
        .interactive_session(&mut out, &mut std::io::Cursor::new(script.as_bytes()), &mut console)
        .await
        .expect("session runs");
    (out.into_events(), report, String::from_utf8(console).unwrap())
}

fn user_commands(events: &[cgmi_core::orchestrator::TranscriptEvent]) -> Vec<String> {
    events
        .iter()
        .filter_map(|e| match &e.body {
            EventBody::UserCommand { command } => Some(command.clone()),
            _ => None,
        })
        .collect()
}

#[tokio::test]
async fn interactive_advance_and_end() {
    let (events, report, _) = steer("advance\nend\n").await;
    assert_eq!(check_invariants(&events), Vec::<String>::new());
    let transition = events
        .iter()
        .find_map(|e| match &e.body {
            EventBody::StageTransition { from, to, rationale, .. } => Some((*from, *to, rationale.clone())),
            _ => None,
        })
        .unwrap();
    assert_eq!(transition, (0, 1, "user command".to_string()));
    assert_eq!(report.termination, Termination::UserEnd);
    assert_eq!(report.stages_completed, 1);
    assert_eq!(user_commands(&events), ["advance", "end"]);
    assert!(events.iter().all(|e| e.body.speech().is_none()), "no turn was requested");
}

#[tokio::test]
async fn interactive_advance_past_final_stage_ends_lesson() {
    let (events, report, _) = steer("advance\nadvance\nadvance\n").await;
    assert_eq!(report.termination, Termination::UserEnd);
    assert_eq!(report.stages_completed, 3);
    assert!(matches!(events.last().unwrap().body, EventBody::LessonEnd { termination: Termination::UserEnd, .. }));
}

#[tokio::test]
async fn interactive_pause_blocks_turns_until_resume() {
    let (events, report, console) = steer("pause\nnext\nresume\nnext\nend\n").await;
    assert_eq!(report.termination, Termination::UserEnd);
    assert_eq!(user_commands(&events), ["pause", "resume", "next", "end"]);
    let spoken = events.iter().filter(|e| e.body.speech().is_some()).count();
    assert_eq!(spoken, 1, "only the post-resume turn speaks");
    assert!(console.contains("paused"));
}

#[tokio::test]
async fn interactive_ask_unknown_student_is_refused() {
    let (events, _, console) = steer("ask Zed What is a root?\nend\n").await;
    assert_eq!(user_commands(&events), ["end"]);
    assert!(console.contains("Zed"));
}

#[tokio::test]
async fn interactive_end_of_input_finishes_automatically() {
    let (events, report, _) = steer("next\n").await;
    assert_eq!(report.termination, Termination::SupervisorEnd);
    assert_eq!(check_invariants(&events), Vec::<String>::new());
}

#[tokio::test]
async fn exported_memory_seeds_the_next_lesson() {
    let mut first = Scenario::load(&demo(), &Overrides::default()).await.unwrap();
    let mut out = TranscriptWriter::in_memory();
    first.run_lesson(&mut out).await.unwrap();
    let exported = first.export_memory();
    let teacher_before = &exported["Mrs. Smith"];
    assert!(!teacher_before.declarative.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("memory.json");
    std::fs::write(&path, serde_json::to_string(&exported).unwrap()).unwrap();
    let mut loaded = cgmi_core::orchestrator::LoadedConfig::read(&demo()).unwrap();
    loaded.config.memory_import = Some(path);
    let backend = loaded.backend(None).unwrap();
    let second = Scenario::build(loaded, backend).await.unwrap();

    let carried = second.agent("Mrs. Smith").unwrap().cognition().export();
    let old: Vec<&str> = teacher_before.declarative.iter().map(|e| e.content.as_str()).collect();
    let new: Vec<&str> = carried.declarative.iter().map(|e| e.content.as_str()).collect();
    assert_eq!(&new[..old.len()], &old[..]);
    assert!(carried.declarative.iter().all(|e| e.turn == 0));
    let reflection = teacher_before.last_reflection.as_ref().unwrap();
    assert!(new.contains(&reflection.text.as_str()));
}
