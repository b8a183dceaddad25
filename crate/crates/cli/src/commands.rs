use std::io::Write;
use std::path::{Path, PathBuf};

use cgmi_core::analysis::{aggregate_reports, code_transcript, compute_report, render_table, Coder, FiasReport, Lexicon};
use cgmi_core::orchestrator::{
    audit_agent, read_transcript, LoadedConfig, OrchestratorError, Overrides, Scenario, TranscriptWriter,
};
use cgmi_core::scale::{load_scale_with, CheckOutcome, LoadMode};
use serde_json::json;

use crate::{screenplay, CliError, CoderArg, LessonArgs};

fn from_orchestrator(e: OrchestratorError) -> CliError {
    if e.is_config() {
        CliError::Input(e.to_string())
    } else {
        CliError::Runtime(e.to_string())
    }
}

fn write_json(path: &Path, value: serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&value).expect("value serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub async fn run(args: LessonArgs, interactive: bool) -> Result<u8, CliError> {
    let overrides = Overrides {
        backend: args.backend.map(Into::into),
        selection_mode: args.select.map(Into::into),
        seed: args.seed,
        lenient: args.lenient,
        record: args.record.clone(),
    };
    let mut scenario = Scenario::load(&args.config, &overrides).await.map_err(from_orchestrator)?;
    let mut out = TranscriptWriter::to_file(&args.out).map_err(|e| CliError::Input(format!("{}: {e}", args.out.display())))?;
    let result = if interactive {
        let stdin = std::io::stdin();
        let mut commands = stdin.lock();
        let mut console = std::io::stdout();
        scenario.interactive_session(&mut out, &mut commands, &mut console).await
    } else {
        scenario.run_lesson(&mut out).await
    };
    let report = match result {
        Ok(report) => report,
        Err(e) => {
            eprintln!("partial transcript with {} events kept at {}", out.events().len(), args.out.display());
            return Err(from_orchestrator(e));
        }
    };
    let report_path = args.report.unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".report.json");
        PathBuf::from(p)
    });
    write_json(&report_path, json!(report))?;
    if let Some(path) = &args.export_memory {
        write_json(path, json!(scenario.export_memory()))?;
    }
    println!(
        "lesson ended ({:?}): {} events, {} stages completed, {} backend calls",
        report.termination,
        report.events,
        report.stages_completed,
        report.backend_calls.values().sum::<usize>()
    );
    println!("transcript: {}\nreport: {}", args.out.display(), report_path.display());
    Ok(0)
}

pub async fn analyze(
    transcripts: &[PathBuf],
    coder: CoderArg,
    lexicon: Option<PathBuf>,
    config: Option<PathBuf>,
    out: &Path,
    aggregate: bool,
) -> Result<u8, CliError> {
    let coder = match coder {
        CoderArg::Lexicon => Coder::Lexicon(match lexicon {
            Some(path) => Lexicon::load(&path).map_err(|e| CliError::Input(e.to_string()))?,
            None => Lexicon::default(),
        }),
        CoderArg::Backend => {
            let path = config.ok_or_else(|| CliError::Input("--coder backend needs --config to find the backend".into()))?;
            let loaded = LoadedConfig::read(&path).map_err(from_orchestrator)?;
            Coder::Backend(loaded.backend(None).map_err(from_orchestrator)?)
        }
    };
    let mut reports: Vec<(String, FiasReport)> = Vec::new();
    for path in transcripts {
        let shown = path.display().to_string();
        let events = read_transcript(path).map_err(|e| CliError::Input(format!("{shown}: {e}")))?;
        let sequence = code_transcript(&events, &coder)
            .await
            .map_err(|e| CliError::Runtime(format!("{shown}: {e}")))?;
        let report = compute_report(&sequence).map_err(|e| CliError::Input(format!("{shown}: {e}")))?;
        reports.push((shown, report));
    }
    let mean = if aggregate {
        let all: Vec<FiasReport> = reports.iter().map(|(_, r)| r.clone()).collect();
        Some(aggregate_reports(&all).map_err(|e| CliError::Input(e.to_string()))?)
    } else {
        None
    };
    if reports.len() == 1 && mean.is_none() {
        write_json(out, json!(reports[0].1))?;
    } else {
        let listed: Vec<_> = reports.iter().map(|(t, r)| json!({"transcript": t, "report": r})).collect();
        let mut doc = json!({ "reports": listed });
        if let Some(m) = &mean {
            doc["aggregate"] = serde_json::to_value(m).expect("report serializes");
        }
        write_json(out, doc)?;
    }
    let names: Vec<String> = (1..=reports.len()).map(|i| format!("T{i}")).collect();
    let mut columns: Vec<(&str, &FiasReport)> = names.iter().map(String::as_str).zip(reports.iter().map(|(_, r)| r)).collect();
    if let Some(m) = &mean {
        columns.push(("Mean", m));
    }
    for (name, (path, _)) in names.iter().zip(&reports) {
        println!("{name}: {path}");
    }
    print!("{}", render_table(&columns));
    Ok(0)
}

pub async fn persona_check(config: &Path, agent: &str, m: usize, seed: u64, lenient: bool) -> Result<u8, CliError> {
    let mut loaded = LoadedConfig::read(config).map_err(from_orchestrator)?;
    loaded
        .apply(&Overrides {
            lenient,
            ..Overrides::default()
        })
        .map_err(from_orchestrator)?;
    let reports = audit_agent(&loaded, agent, m, seed).await.map_err(from_orchestrator)?;
    let mut drift = false;
    for r in &reports {
        println!("{}", serde_json::to_string_pretty(r).expect("report serializes"));
        drift |= r.outcome != CheckOutcome::Pass;
    }
    let verdict = if drift { "drift detected; persona restored" } else { "consistent" };
    println!("{agent}: {verdict} ({} scales checked, m = {m})", reports.len());
    Ok(if drift { 4 } else { 0 })
}

pub fn validate(config: Option<&Path>, scales: &[PathBuf], lenient: bool) -> Result<u8, CliError> {
    if config.is_none() && scales.is_empty() {
        return Err(CliError::Input("give --config and/or --scale".into()));
    }
    let mode = if lenient { LoadMode::Lenient } else { LoadMode::Strict };
    let mut stdout = std::io::stdout();
    for path in scales {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let (tree, warnings) = load_scale_with(&text, mode).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let _ = writeln!(stdout, "ok    scale {} ({:?}, {} nodes)", path.display(), tree.name(), tree.len());
        for w in warnings {
            let _ = writeln!(stdout, "warn  scale {}: {w}", path.display());
        }
    }
    let Some(config) = config else {
        return Ok(0);
    };
    let mut loaded = LoadedConfig::read(config).map_err(from_orchestrator)?;
    loaded
        .apply(&Overrides {
            lenient,
            ..Overrides::default()
        })
        .map_err(from_orchestrator)?;
    let _ = writeln!(stdout, "ok    config {}", config.display());
    let teacher = loaded.teacher_profile().map_err(from_orchestrator)?;
    let _ = writeln!(stdout, "ok    teacher {} ({} scales)", teacher.agent_name, teacher.scales.len());
    for student in loaded.student_profiles().map_err(from_orchestrator)? {
        let _ = writeln!(stdout, "ok    student {} ({} scales)", student.agent_name, student.scales.len());
    }
    loaded.skills().map_err(from_orchestrator)?;
    let _ = writeln!(stdout, "ok    skill_library");
    loaded.templates().map_err(from_orchestrator)?;
    let _ = writeln!(stdout, "ok    prompt_templates");
    loaded.backend(None).map_err(from_orchestrator)?;
    let _ = writeln!(stdout, "ok    backend ({:?})", loaded.config.backend.kind);
    Ok(0)
}

pub fn replay(transcript: &Path) -> Result<u8, CliError> {
    let events = read_transcript(transcript).map_err(|e| CliError::Input(format!("{}: {e}", transcript.display())))?;
    print!("{}", screenplay::render(&events));
    Ok(0)
}
