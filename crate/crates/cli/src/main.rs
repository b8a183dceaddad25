//! `cgmi`: run, steer, check and analyze simulated lessons.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 backend or
//! protocol failure, 4 persona drift detected by `persona-check`.

mod commands;
mod screenplay;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use cgmi_core::orchestrator::{BackendKind, SelectionMode};

#[derive(Parser)]
#[command(name = "cgmi", version, about = "Configurable multi-agent classroom simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Scripted,
    Http,
    Replay,
}

impl From<BackendArg> for BackendKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Scripted => BackendKind::Scripted,
            BackendArg::Http => BackendKind::Http,
            BackendArg::Replay => BackendKind::Replay,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectArg {
    Willingness,
    Random,
}

impl From<SelectArg> for SelectionMode {
    fn from(s: SelectArg) -> Self {
        match s {
            SelectArg::Willingness => SelectionMode::Willingness,
            SelectArg::Random => SelectionMode::Random,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CoderArg {
    Lexicon,
    Backend,
}

#[derive(clap::Args)]
struct LessonArgs {
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Transcript output (JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Run report output; defaults to `<out>.report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long, value_enum)]
    select: Option<SelectArg>,
    /// Record every backend exchange into this cassette.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Write each agent's memory here after the lesson.
    #[arg(long)]
    export_memory: Option<PathBuf>,
    /// Accept scales whose shape differs from the standard instrument.
    #[arg(long)]
    lenient: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a whole lesson.
    Run(LessonArgs),
    /// Run a lesson steered by commands read from stdin.
    Interactive(LessonArgs),
    /// Code transcripts with FIAS categories and report the statistics.
    Analyze {
        /// Transcript to analyze; repeat for several lessons.
        #[arg(long = "transcript", required = true)]
        transcripts: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "lexicon")]
        coder: CoderArg,
        /// Keyword table replacing the built-in lexicon.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Scenario config whose backend the backend coder uses.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report output (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Add the mean over all transcripts.
        #[arg(long)]
        aggregate: bool,
    },
    /// Probe one agent's persona and restore it on drift.
    PersonaCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        agent: String,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        lenient: bool,
    },
    /// Load and validate every file a config references, or single scale files.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// A scale document to check on its own; repeatable.
        #[arg(long = "scale")]
        scales: Vec<PathBuf>,
        #[arg(long)]
        lenient: bool,
    },
    /// Print a transcript as a readable screenplay.
    Replay {
        #[arg(long)]
        transcript: PathBuf,
    },
}

/// A failure with its exit code.
#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => commands::run(args, false).await,
        Command::Interactive(args) => commands::run(args, true).await,
        Command::Analyze {
            transcripts,
            coder,
            lexicon,
            config,
            out,
            aggregate,
        } => commands::analyze(&transcripts, coder, lexicon, config, &out, aggregate).await,
        Command::PersonaCheck {
            config,
            agent,
            m,
            seed,
            lenient,
        } => commands::persona_check(&config, &agent, m, seed, lenient).await,
        Command::Validate { config, scales, lenient } => commands::validate(config.as_deref(), &scales, lenient),
        Command::Replay { transcript } => commands::replay(&transcript),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
