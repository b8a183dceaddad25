use std::path::Path;

use futures::future::join_all;
use serde::{Deserialize, Serialize};

use super::{AnalysisError, CodedSequence, FiasCode};
use crate::lm_backend::{tags, Backend, LmRequest, Sampling};
use crate::orchestrator::{SpeechRole, TranscriptEvent};

const EMBEDDED: &str = include_str!("../../data/lexicon.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconRule {
    pub keyword: String,
    pub code: FiasCode,
}

/// Keyword table, tried in order; the first rule whose keyword occurs in the
/// line (case-insensitively) supplies the code. Teacher and student lines
/// have separate tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub teacher: Vec<LexiconRule>,
    pub student: Vec<LexiconRule>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::from_json(EMBEDDED).expect("embedded lexicon is valid")
    }
}

impl Lexicon {
    pub fn from_json(text: &str) -> Result<Self, AnalysisError> {
        let lexicon: Lexicon =
            serde_json::from_str(text).map_err(|e| AnalysisError::Lexicon(format!("does not parse: {e}")))?;
        lexicon.validate()?;
        Ok(lexicon)
    }

    pub fn load(path: &Path) -> Result<Self, AnalysisError> {
        let text = std::fs::read_to_string(path).map_err(|e| AnalysisError::Lexicon(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| AnalysisError::Lexicon(format!("{}: {e}", path.display())))
    }

    fn validate(&self) -> Result<(), AnalysisError> {
        for (table, rules, ok) in [
            ("teacher", &self.teacher, FiasCode::is_teacher as fn(FiasCode) -> bool),
            ("student", &self.student, FiasCode::is_student),
        ] {
            for (i, r) in rules.iter().enumerate() {
                if r.keyword.trim().is_empty() {
                    return Err(AnalysisError::Lexicon(format!("{table} rule {i} has an empty keyword")));
                }
                if !ok(r.code) {
                    return Err(AnalysisError::Lexicon(format!("{table} rule {i} uses {}", r.code)));
                }
            }
        }
        Ok(())
    }

    /// The first matching rule's code, or `None` when nothing matches.
    pub fn lookup(&self, role: SpeechRole, text: &str) -> Option<FiasCode> {
        let rules = match role {
            SpeechRole::Teacher => &self.teacher,
            SpeechRole::Student => &self.student,
            SpeechRole::User => return None,
        };
        let lower = text.to_lowercase();
        rules.iter().find(|r| lower.contains(&r.keyword.to_lowercase())).map(|r| r.code)
    }
}

pub enum Coder {
    Lexicon(Lexicon),
    Backend(Backend),
}

/// A line no rule matched, coded by the speaker-role default instead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Uncoded {
    pub index: u64,
    pub fallback: FiasCode,
}

/// Teacher and student lines in order. Lines typed by a human operator are
/// not part of the classroom interaction and are skipped.
fn spoken(events: &[TranscriptEvent]) -> impl Iterator<Item = (u64, SpeechRole, &str)> {
    events.iter().filter_map(|e| {
        let s = e.body.speech()?;
        (s.role != SpeechRole::User).then_some((e.index, s.role, s.text.as_str()))
    })
}

fn sequence(codes: Vec<(u64, FiasCode)>) -> CodedSequence {
    CodedSequence::new(codes).expect("transcript indices increase")
}

pub fn code_with_lexicon(events: &[TranscriptEvent], lexicon: &Lexicon) -> (CodedSequence, Vec<Uncoded>) {
    let mut unmatched = Vec::new();
    let codes = spoken(events)
        .map(|(index, role, text)| {
            let code = lexicon.lookup(role, text).unwrap_or_else(|| {
                let fallback = if role == SpeechRole::Teacher { FiasCode::B5 } else { FiasCode::B8 };
                tracing::debug!(index, %fallback, "no lexicon match");
                unmatched.push(Uncoded { index, fallback });
                fallback
            });
            (index, code)
        })
        .collect();
    (sequence(codes), unmatched)
}

fn coder_prompt(role: SpeechRole, text: &str) -> String {
    let (who, allowed) = match role {
        SpeechRole::Student => ("student", "B8 or B9"),
        _ => ("teacher", "one of B1 to B7"),
    };
    let mut prompt = format!("Code this {who} line from a lesson with one Flanders interaction category.\n\n## Categories\n");
    for c in FiasCode::ALL {
        prompt.push_str(&format!("{c}: {}\n", c.label()));
    }
    prompt.push_str(&format!("\n## Line\n{text}\n\nAnswer with the category code only ({allowed})."));
    prompt
}

fn parse_code(role: SpeechRole, reply: &str) -> Option<FiasCode> {
    let code: FiasCode = reply.trim().trim_end_matches('.').parse().ok()?;
    let permitted = if role == SpeechRole::Student { code.is_student() } else { code.is_teacher() };
    permitted.then_some(code)
}

/// One call per line, issued concurrently; the reply must be a single
/// category permitted for the speaker.
pub async fn code_with_backend(events: &[TranscriptEvent], backend: &Backend) -> Result<CodedSequence, AnalysisError> {
    let calls = spoken(events).map(|(index, role, text)| async move {
        let request = LmRequest::single(tags::FIAS_CODER, "You are a trained classroom interaction coder.", coder_prompt(role, text), Sampling::GENERAL);
        let reply = backend
            .complete(&request)
            .await
            .map_err(|source| AnalysisError::Backend { index, source })?
            .text;
        parse_code(role, &reply)
            .map(|c| (index, c))
            .ok_or(AnalysisError::CoderProtocol { index, reply })
    });
    let codes = join_all(calls).await.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(sequence(codes))
}

pub async fn code_transcript(events: &[TranscriptEvent], coder: &Coder) -> Result<CodedSequence, AnalysisError> {
    match coder {
        Coder::Lexicon(lexicon) => {
            let (seq, unmatched) = code_with_lexicon(events, lexicon);
            if !unmatched.is_empty() {
                tracing::warn!(count = unmatched.len(), "lines without a lexicon match were coded by speaker role");
            }
            Ok(seq)
        }
        Coder::Backend(backend) => code_with_backend(events, backend).await,
    }
}
