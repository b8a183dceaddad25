//! Flanders Interaction Analysis over lesson transcripts.
//!
//! Each spoken line is coded once into one of nine categories (seven for the
//! teacher, two for students), and the coded sequence is summarized as
//! percentages per category plus the teacher-talk, pupil-response and
//! pupil-initiation shares and the indirect/direct influence ratio.

mod coder;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm_backend::BackendError;

pub use coder::{code_transcript, code_with_backend, code_with_lexicon, Coder, Lexicon, LexiconRule, Uncoded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FiasCode {
    B1,
    B2,
    B3,
    B4,
    B5,
    B6,
    B7,
    B8,
    B9,
}

impl FiasCode {
    pub const ALL: [FiasCode; 9] = [
        FiasCode::B1,
        FiasCode::B2,
        FiasCode::B3,
        FiasCode::B4,
        FiasCode::B5,
        FiasCode::B6,
        FiasCode::B7,
        FiasCode::B8,
        FiasCode::B9,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FiasCode::B1 => "Accept feeling",
            FiasCode::B2 => "Praises or encourages",
            FiasCode::B3 => "Accept ideas",
            FiasCode::B4 => "Asks questions",
            FiasCode::B5 => "Lecturing",
            FiasCode::B6 => "Gives directions",
            FiasCode::B7 => "Criticising",
            FiasCode::B8 => "Pupil talk response",
            FiasCode::B9 => "Pupil talk Initiation",
        }
    }

    pub fn is_teacher(self) -> bool {
        !self.is_student()
    }

    pub fn is_student(self) -> bool {
        matches!(self, FiasCode::B8 | FiasCode::B9)
    }

    /// B1–B4: influence that opens room for students.
    pub fn is_indirect(self) -> bool {
        matches!(self, FiasCode::B1 | FiasCode::B2 | FiasCode::B3 | FiasCode::B4)
    }

    /// B5–B7: influence that directs students.
    pub fn is_direct(self) -> bool {
        matches!(self, FiasCode::B5 | FiasCode::B6 | FiasCode::B7)
    }
}

impl fmt::Display for FiasCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for FiasCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FiasCode::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("not a category: {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("coded sequence is empty")]
    EmptySequence,
    #[error("no reports to aggregate")]
    NoReports,
    #[error("event indices must increase: {prev} then {next}")]
    OutOfOrder { prev: u64, next: u64 },
    #[error("event {index}: {code} cannot be applied to a {speaker} line")]
    RoleMismatch { index: u64, code: FiasCode, speaker: &'static str },
    #[error("event {index} is not a spoken line")]
    NotSpeech { index: u64 },
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("coder reply for event {index} is not a single permitted category: {reply:?}")]
    CoderProtocol { index: u64, reply: String },
    #[error("coder call for event {index} failed: {source}")]
    Backend {
        index: u64,
        #[source]
        source: BackendError,
    },
}

/// Codes in transcript order, one per spoken line.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedSequence {
    codes: Vec<(u64, FiasCode)>,
}

impl CodedSequence {
    pub fn new(codes: Vec<(u64, FiasCode)>) -> Result<Self, AnalysisError> {
        for pair in codes.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(AnalysisError::OutOfOrder {
                    prev: pair[0].0,
                    next: pair[1].0,
                });
            }
        }
        Ok(Self { codes })
    }

    /// A sequence with the given number of each code, indexed 0.. in
    /// category order.
    pub fn from_counts(counts: &[(FiasCode, usize)]) -> Self {
        let codes = counts
            .iter()
            .flat_map(|&(code, n)| std::iter::repeat_n(code, n))
            .enumerate()
            .map(|(i, c)| (i as u64, c))
            .collect();
        Self { codes }
    }

    pub fn codes(&self) -> &[(u64, FiasCode)] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn counts(&self) -> BTreeMap<FiasCode, usize> {
        let mut out: BTreeMap<FiasCode, usize> = FiasCode::ALL.iter().map(|c| (*c, 0)).collect();
        for (_, c) in &self.codes {
            *out.get_mut(c).expect("all codes present") += 1;
        }
        out
    }
}

/// Unrounded percentages; [`round_half_up`] gives the two-decimal figures
/// used for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiasReport {
    pub utterances: usize,
    pub proportions: BTreeMap<FiasCode, f64>,
    pub teacher_talk: f64,
    pub pupil_response: f64,
    pub pupil_initiation: f64,
    /// (B1+B2+B3+B4) / (B5+B6+B7); absent when no direct behaviour was coded.
    pub indirect_direct_ratio: Option<f64>,
}

/// Rounds to two decimals with halves going up.
pub fn round_half_up(x: f64) -> f64 {
    let scaled = x * 100.0;
    // Nudge values such as 12.5 stored as 12.4999... onto the intended side.
    ((scaled + 0.5 + 1e-9 * scaled.abs().max(1.0)).floor()) / 100.0
}

pub fn compute_report(sequence: &CodedSequence) -> Result<FiasReport, AnalysisError> {
    if sequence.is_empty() {
        return Err(AnalysisError::EmptySequence);
    }
    let counts = sequence.counts();
    let total = sequence.len() as f64;
    let pct = |n: usize| n as f64 * 100.0 / total;
    let sum = |pred: fn(FiasCode) -> bool| counts.iter().filter(|(c, _)| pred(**c)).map(|(_, n)| *n).sum::<usize>();
    let indirect = sum(FiasCode::is_indirect);
    let direct = sum(FiasCode::is_direct);
    Ok(FiasReport {
        utterances: sequence.len(),
        proportions: counts.iter().map(|(c, n)| (*c, pct(*n))).collect(),
        teacher_talk: pct(sum(FiasCode::is_teacher)),
        pupil_response: pct(counts[&FiasCode::B8]),
        pupil_initiation: pct(counts[&FiasCode::B9]),
        indirect_direct_ratio: (direct > 0).then(|| indirect as f64 / direct as f64),
    })
}

/// Field-wise arithmetic mean. The ratio is averaged only when every report
/// has one.
pub fn aggregate_reports(reports: &[FiasReport]) -> Result<FiasReport, AnalysisError> {
    if reports.is_empty() {
        return Err(AnalysisError::NoReports);
    }
    let n = reports.len() as f64;
    let mean = |f: &dyn Fn(&FiasReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let ratios: Option<Vec<f64>> = reports.iter().map(|r| r.indirect_direct_ratio).collect();
    Ok(FiasReport {
        utterances: reports.iter().map(|r| r.utterances).sum(),
        proportions: FiasCode::ALL
            .iter()
            .map(|c| (*c, mean(&|r: &FiasReport| r.proportions.get(c).copied().unwrap_or(0.0))))
            .collect(),
        teacher_talk: mean(&|r| r.teacher_talk),
        pupil_response: mean(&|r| r.pupil_response),
        pupil_initiation: mean(&|r| r.pupil_initiation),
        indirect_direct_ratio: ratios.map(|v| v.iter().sum::<f64>() / n),
    })
}

/// Plain-text table, one column per report, rows in category order.
pub fn render_table(columns: &[(&str, &FiasReport)]) -> String {
    let width = FiasCode::ALL
        .iter()
        .map(|c| format!("{c}.{}", c.label()).len())
        .max()
        .unwrap_or(0)
        .max("Indirect/direct ratio".len());
    let mut out = format!("{:<width$}", "Categories");
    for (name, _) in columns {
        out.push_str(&format!(" | {name:>8}"));
    }
    out.push('\n');
    let rule = "-".repeat(width + columns.len() * 11);
    out.push_str(&rule);
    out.push('\n');
    let row = |out: &mut String, label: &str, value: &dyn Fn(&FiasReport) -> String| {
        out.push_str(&format!("{label:<width$}"));
        for (_, r) in columns {
            out.push_str(&format!(" | {:>8}", value(r)));
        }
        out.push('\n');
    };
    let pct = |x: f64| format!("{:.2}%", round_half_up(x));
    for c in FiasCode::ALL {
        row(&mut out, &format!("{c}.{}", c.label()), &|r| pct(r.proportions.get(&c).copied().unwrap_or(0.0)));
        if matches!(c, FiasCode::B4 | FiasCode::B7) {
            out.push_str(&rule);
            out.push('\n');
        }
    }
    out.push_str(&rule);
    out.push('\n');
    row(&mut out, "Teacher talk (B1-B7)", &|r| pct(r.teacher_talk));
    row(&mut out, "Pupil response (B8)", &|r| pct(r.pupil_response));
    row(&mut out, "Pupil initiation (B9)", &|r| pct(r.pupil_initiation));
    row(&mut out, "Indirect/direct ratio", &|r| match r.indirect_direct_ratio {
        Some(x) => format!("{x:.2}"),
        None => "n/a".into(),
    });
    out
}
