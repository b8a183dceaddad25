use std::collections::{BTreeSet, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CognitionError;

pub const DEFAULT_WORKING_CAPACITY: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perception {
    pub turn: u64,
    pub text: String,
}

/// Bounded FIFO of recent perceptions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkingMemory {
    entries: VecDeque<Perception>,
    capacity: usize,
}

impl Default for WorkingMemory {
    fn default() -> Self {
        Self::with_capacity(DEFAULT_WORKING_CAPACITY)
    }
}

impl WorkingMemory {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            entries: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &Perception> {
        self.entries.iter()
    }

    pub fn last_turn(&self) -> Option<u64> {
        self.entries.back().map(|p| p.turn)
    }

    /// Turns covered by the current contents.
    pub fn span(&self) -> Option<(u64, u64)> {
        Some((self.entries.front()?.turn, self.entries.back()?.turn))
    }

    pub(crate) fn push(&mut self, turn: u64, text: String) {
        self.entries.push_back(Perception { turn, text });
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
    }

    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|p| format!("[turn {}] {}", p.turn, p.text))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKind {
    Declarative,
    Procedural,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub turn: u64,
    pub kind: MemoryKind,
    pub content: String,
    pub source_span: (u64, u64),
}

/// A text stamped with the turn it was produced for, such as a reflection or plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamped {
    pub turn: u64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillEntry {
    pub id: String,
    pub tags: BTreeSet<String>,
    pub content: String,
}

/// Configurable domain knowledge consulted during reflection and planning.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SkillLibrary {
    entries: Vec<SkillEntry>,
}

impl SkillLibrary {
    pub fn new(entries: Vec<SkillEntry>) -> Result<Self, CognitionError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(CognitionError::Skills(format!("duplicate skill id {:?}", e.id)));
            }
            if e.tags.iter().all(|t| t.trim().is_empty()) {
                return Err(CognitionError::Skills(format!("skill {:?} has no tags", e.id)));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_json(text: &str) -> Result<Self, CognitionError> {
        let entries: Vec<SkillEntry> = serde_json::from_str(text)
            .map_err(|e| CognitionError::Skills(format!("skill library does not parse: {e}")))?;
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self, CognitionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CognitionError::Skills(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
            .map_err(|e| CognitionError::Skills(format!("{}: {e}", path.display())))
    }

    pub fn entries(&self) -> &[SkillEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn tokens(text: &str) -> HashSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Keyword-overlap retrieval.
///
/// A tag counts when every one of its words occurs in the query. Entries are
/// ranked by descending count, ties by id; `k = None` returns the whole
/// library in that order.
pub fn retrieve_skills<'a>(
    library: &'a SkillLibrary,
    query: &str,
    k: Option<usize>,
) -> Vec<&'a SkillEntry> {
    let query = tokens(query);
    let mut scored: Vec<(usize, &SkillEntry)> = library
        .entries
        .iter()
        .map(|e| {
            let overlap = e
                .tags
                .iter()
                .filter(|tag| {
                    let words = tokens(tag);
                    !words.is_empty() && words.is_subset(&query)
                })
                .count();
            (overlap, e)
        })
        .collect();
    scored.sort_by(|(sa, a), (sb, b)| sb.cmp(sa).then_with(|| a.id.cmp(&b.id)));
    let k = k.unwrap_or(scored.len());
    scored.into_iter().take(k).map(|(_, e)| e).collect()
}

pub fn render_skills(skills: &[&SkillEntry]) -> String {
    if skills.is_empty() {
        return "(none)".to_string();
    }
    skills
        .iter()
        .map(|s| format!("- [{}] {}", s.id, s.content))
        .collect::<Vec<_>>()
        .join("\n")
}
