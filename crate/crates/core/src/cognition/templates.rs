use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::CognitionError;

pub const PLACEHOLDERS: [&str; 7] = [
    "persona",
    "declarative",
    "procedural",
    "skills",
    "reflection",
    "plan",
    "working_memory",
];

static SLOT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([a-z_]+)\}").expect("static regex"));

/// Prompt wording for the cognitive loop.
///
/// The two distillation instructions are prepended verbatim to the working
/// memory; the other three are templates with `{slot}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptTemplates {
    pub cot_instruction: String,
    pub coa_instruction: String,
    pub reflect: String,
    pub plan: String,
    pub act: String,
}

#[derive(Deserialize)]
struct Embedded {
    cot_instruction: String,
    coa_instruction: String,
    reflect: String,
    plan: String,
    act: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        let e: Embedded = serde_json::from_str(include_str!("../../data/templates.json"))
            .expect("embedded templates parse");
        Self {
            cot_instruction: e.cot_instruction,
            coa_instruction: e.coa_instruction,
            reflect: e.reflect,
            plan: e.plan,
            act: e.act,
        }
    }
}

impl PromptTemplates {
    pub fn from_json(text: &str) -> Result<Self, CognitionError> {
        let t: PromptTemplates = serde_json::from_str(text)
            .map_err(|e| CognitionError::Template(format!("templates do not parse: {e}")))?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, CognitionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CognitionError::Template(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
            .map_err(|e| CognitionError::Template(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CognitionError> {
        for (name, text) in [("cot_instruction", &self.cot_instruction), ("coa_instruction", &self.coa_instruction)] {
            if text.trim().is_empty() {
                return Err(CognitionError::Template(format!("{name} is empty")));
            }
        }
        check("reflect", &self.reflect, &["declarative", "skills"])?;
        check("plan", &self.plan, &["procedural", "skills"])?;
        check("act", &self.act, &["reflection", "plan", "working_memory"])?;
        Ok(())
    }
}

/// Every slot must be known, and `required` must all appear in that order.
fn check(name: &str, template: &str, required: &[&str]) -> Result<(), CognitionError> {
    for cap in SLOT.captures_iter(template) {
        let slot = &cap[1];
        if !PLACEHOLDERS.contains(&slot) {
            return Err(CognitionError::Template(format!(
                "template {name} uses unknown slot {{{slot}}}"
            )));
        }
    }
    let mut last = 0;
    for slot in required {
        let pos = template.find(&format!("{{{slot}}}")).ok_or_else(|| {
            CognitionError::Template(format!("template {name} lacks {{{slot}}}"))
        })?;
        if pos < last {
            return Err(CognitionError::Template(format!(
                "template {name}: slots must appear in the order {}",
                required.join(", ")
            )));
        }
        last = pos;
    }
    Ok(())
}

/// Single-pass substitution: values are inserted verbatim and never rescanned.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    SLOT.replace_all(template, |cap: &regex::Captures<'_>| {
        values
            .iter()
            .find(|(k, _)| *k == &cap[1])
            .map(|(_, v)| v.to_string())
            .unwrap_or_else(|| cap[0].to_string())
    })
    .into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_carry_instructions() {
        let t = PromptTemplates::default();
        t.validate().unwrap();
        assert!(t.cot_instruction.starts_with("Summarize the class content sequentially"));
        assert!(t.coa_instruction.starts_with("Detail the pedagogical steps"));
    }

    #[test]
    fn fill_does_not_rescan_values() {
        let out = fill("A {plan} B {reflection}", &[("plan", "{reflection}"), ("reflection", "r")]);
        assert_eq!(out, "A {reflection} B r");
    }

    #[test]
    fn rejects_unknown_missing_and_misordered_slots() {
        let mut t = PromptTemplates::default();
        t.act = "{reflection} {plan} {working_memory} {mood}".into();
        assert!(t.validate().is_err());
        t.act = "{reflection} {working_memory}".into();
        assert!(t.validate().is_err());
        t.act = "{plan} {reflection} {working_memory}".into();
        assert!(t.validate().is_err());
        t.act = "{persona}\n{reflection}\n{plan}\n{working_memory}".into();
        assert!(t.validate().is_ok());
    }

    #[test]
    fn partial_files_fall_back_to_defaults() {
        let t = PromptTemplates::from_json(r#"{"cot_instruction": "Sum it up."}"#).unwrap();
        assert_eq!(t.cot_instruction, "Sum it up.");
        assert_eq!(t.act, PromptTemplates::default().act);
    }
}
