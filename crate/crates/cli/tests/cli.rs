use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn demo() -> PathBuf {
    fixtures().join("demo/scenario.json")
}

fn cgmi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgmi")).args(args).output().expect("binary runs")
}

fn cgmi_with_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_cgmi"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn events(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn copy_tree(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

fn run_demo(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let config = demo();
    let mut args = vec!["run", "--config", s(&config), "--out", s(&out)];
    args.extend_from_slice(extra);
    let result = cgmi(&args);
    assert_eq!(code(&result), 0, "{}", String::from_utf8_lossy(&result.stderr));
    out
}

#[test]
fn run_writes_transcript_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_demo(dir.path(), "lesson.jsonl", &[]);
    let evs = events(&out);
    assert_eq!(evs.first().unwrap()["kind"], "lesson_start");
    assert_eq!(evs.last().unwrap()["kind"], "lesson_end");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("lesson.jsonl.report.json")).unwrap()).unwrap();
    assert_eq!(report["termination"], "supervisor_end");
    assert_eq!(report["stages_completed"], 3);
    assert_eq!(report["events"].as_u64().unwrap() as usize, evs.len());
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = cgmi(&["run", "--config", "/nonexistent/scenario.json", "--out", s(&dir.path().join("t.jsonl"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/scenario.json"));
}

#[test]
fn random_selection_is_reproducible_from_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let selections = |name: &str| -> Vec<String> {
        let out = run_demo(dir.path(), name, &["--select", "random", "--seed", "7"]);
        events(&out)
            .iter()
            .filter(|e| e["kind"] == "selection")
            .map(|e| {
                assert_eq!(e["payload"]["mode"], "random");
                e["payload"]["agent"].as_str().unwrap().to_string()
            })
            .collect()
    };
    let a = selections("a.jsonl");
    let b = selections("b.jsonl");
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let bytes_a = std::fs::read(dir.path().join("a.jsonl")).unwrap();
    let bytes_b = std::fs::read(dir.path().join("b.jsonl")).unwrap();
    assert_eq!(bytes_a, bytes_b);
    assert!(!events(&dir.path().join("a.jsonl")).iter().any(|e| e["kind"] == "willingness_scores"));
}

#[test]
fn recorded_cassette_replays_to_the_same_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("fixtures");
    copy_tree(&fixtures(), &tree);
    let config = tree.join("demo/scenario.json");
    let cassette = tree.join("demo/cassette.json");
    let first = dir.path().join("recorded.jsonl");
    let second = dir.path().join("replayed.jsonl");
    let rec = cgmi(&["run", "--config", s(&config), "--out", s(&first), "--record", s(&cassette)]);
    assert_eq!(code(&rec), 0, "{}", String::from_utf8_lossy(&rec.stderr));
    // Remove the script so only the cassette can answer.
    std::fs::remove_file(tree.join("demo/script.json")).unwrap();
    let rep = cgmi(&["run", "--config", s(&config), "--out", s(&second), "--backend", "replay"]);
    assert_eq!(code(&rep), 0, "{}", String::from_utf8_lossy(&rep.stderr));
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

#[test]
fn analyze_single_transcript_sums_to_100() {
    let dir = tempfile::tempdir().unwrap();
    let lesson = run_demo(dir.path(), "lesson.jsonl", &[]);
    let report_path = dir.path().join("fias.json");
    let out = cgmi(&["analyze", "--transcript", s(&lesson), "--out", s(&report_path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let total: f64 = report["proportions"].as_object().unwrap().values().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - 100.0).abs() < 1e-9);
    let split = report["teacher_talk"].as_f64().unwrap()
        + report["pupil_response"].as_f64().unwrap()
        + report["pupil_initiation"].as_f64().unwrap();
    assert!((split - 100.0).abs() < 1e-9);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("B4.Asks questions"));
}

#[test]
fn analyze_aggregates_several_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_demo(dir.path(), "a.jsonl", &[]);
    let b = run_demo(dir.path(), "b.jsonl", &["--select", "random", "--seed", "1"]);
    let c = run_demo(dir.path(), "c.jsonl", &["--select", "random", "--seed", "2"]);
    let report_path = dir.path().join("fias.json");
    let out = cgmi(&[
        "analyze",
        "--transcript",
        s(&a),
        "--transcript",
        s(&b),
        "--transcript",
        s(&c),
        "--aggregate",
        "--out",
        s(&report_path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let reports = doc["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 3);
    let mean_talk: f64 = reports.iter().map(|r| r["report"]["teacher_talk"].as_f64().unwrap()).sum::<f64>() / 3.0;
    assert!((doc["aggregate"]["teacher_talk"].as_f64().unwrap() - mean_talk).abs() < 1e-9);
    assert!(String::from_utf8_lossy(&out.stdout).contains("Mean"));
}

#[test]
fn analyze_rejects_a_transcript_without_speech() {
    let dir = tempfile::tempdir().unwrap();
    let lesson = run_demo(dir.path(), "lesson.jsonl", &[]);
    let text = std::fs::read_to_string(&lesson).unwrap();
    let kept: Vec<&str> = text
        .lines()
        .filter(|l| {
            !l.contains("\"kind\":\"utterance\"")
                && !l.contains("\"kind\":\"question_to_class\"")
                && !l.contains("\"kind\":\"question_to_student\"")
        })
        .collect();
    let silent = dir.path().join("silent.jsonl");
    std::fs::write(&silent, kept.join("\n") + "\n").unwrap();
    let out = cgmi(&["analyze", "--transcript", s(&silent), "--out", s(&dir.path().join("r.json"))]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn persona_check_passes_on_a_faithful_agent() {
    let out = cgmi(&["persona-check", "--config", s(&demo()), "--agent", "Emily", "--m", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"outcome\": \"pass\""));
}

#[test]
fn persona_check_reports_drift_with_exit_4() {
    let config = fixtures().join("drift/scenario.json");
    let out = cgmi(&["persona-check", "--config", s(&config), "--agent", "Emily", "--m", "2"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("\"restored\": true"));
    assert!(!stdout.contains("\"restored\": false"));
}

#[test]
fn persona_check_rejects_oversized_m_and_unknown_agents() {
    let too_many = cgmi(&["persona-check", "--config", s(&demo()), "--agent", "Emily", "--m", "9"]);
    assert_eq!(code(&too_many), 2);
    let unknown = cgmi(&["persona-check", "--config", s(&demo()), "--agent", "Nobody"]);
    assert_eq!(code(&unknown), 2);
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Emily"));
}

#[test]
fn validate_accepts_the_demo_and_shipped_scales() {
    let scales = fixtures().join("scales");
    let out = cgmi(&[
        "validate",
        "--config",
        s(&demo()),
        "--scale",
        s(&scales.join("bigfive.json")),
        "--scale",
        s(&scales.join("sternberg.json")),
        "--scale",
        s(&scales.join("solomon.json")),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn validate_names_the_node_with_a_bad_sum() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(fixtures().join("scales/bigfive.json")).unwrap()).unwrap();
    let nodes = doc["nodes"].as_array_mut().unwrap();
    let target = nodes.iter_mut().find(|n| n["id"] == "E").unwrap();
    let score = target["score"].as_i64().unwrap();
    target["score"] = Value::from(if score > 5 { score - 1 } else { score + 1 });
    let bad = dir.path().join("bigfive.json");
    std::fs::write(&bad, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = cgmi(&["validate", "--scale", s(&bad)]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("node \"E\""), "{err}");
}

#[test]
fn validate_reports_missing_templates() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("fixtures");
    copy_tree(&fixtures(), &tree);
    std::fs::remove_file(tree.join("demo/templates.json")).unwrap();
    let out = cgmi(&["validate", "--config", s(&tree.join("demo/scenario.json"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("prompt_templates"));
}

#[test]
fn interactive_ask_routes_to_the_named_student() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("i.jsonl");
    let out = cgmi_with_stdin(
        &["interactive", "--config", s(&demo()), "--out", s(&out_path)],
        "next\nask Samantha What does a parabola look like?\nend\n",
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let evs = events(&out_path);
    let q = evs
        .iter()
        .position(|e| e["kind"] == "question_to_student" && e["speaker"] == "user")
        .expect("user question logged");
    assert_eq!(evs[q]["payload"]["target"], "Samantha");
    let answer = evs[q + 1..].iter().find(|e| e["kind"] == "utterance").unwrap();
    assert_eq!(answer["speaker"], "Samantha");
    assert_eq!(evs.last().unwrap()["payload"]["termination"], "user_end");
}

#[test]
fn replay_prints_a_screenplay() {
    let dir = tempfile::tempdir().unwrap();
    let lesson = run_demo(dir.path(), "lesson.jsonl", &[]);
    let out = cgmi(&["replay", "--transcript", s(&lesson)]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("LESSON: Concept of the Quadratic Equation"));
    assert!(text.contains("Emily:\n    I'm really nervous"));
}
