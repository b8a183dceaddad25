use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::AgentError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub description: String,
    pub completion_criterion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeachingPlan {
    pub topic: String,
    pub objectives: Vec<String>,
    pub stages: Vec<Stage>,
}

static STAGE_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d+)\.\s+(.+?):\s+(.+)$").expect("static regex"));

fn plan_error(line: usize, message: impl Into<String>) -> AgentError {
    AgentError::PlanParse(format!("line {line}: {}", message.into()))
}

#[derive(PartialEq)]
enum Section {
    Preamble,
    Objectives,
    Stages,
}

impl TeachingPlan {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.topic.trim().is_empty() {
            return Err(AgentError::PlanParse("topic is empty".into()));
        }
        if self.stages.is_empty() {
            return Err(AgentError::PlanParse("plan has no stages".into()));
        }
        let mut names = HashSet::new();
        for (i, s) in self.stages.iter().enumerate() {
            if s.name.trim().is_empty() || s.description.trim().is_empty() || s.completion_criterion.trim().is_empty() {
                return Err(AgentError::PlanParse(format!("stage {} has an empty field", i + 1)));
            }
            if !names.insert(s.name.as_str()) {
                return Err(AgentError::PlanParse(format!("duplicate stage name {:?}", s.name)));
            }
        }
        Ok(())
    }

    pub fn stage(&self, index: usize) -> Option<&Stage> {
        self.stages.get(index)
    }

    pub fn is_final(&self, index: usize) -> bool {
        index + 1 == self.stages.len()
    }

    /// Plan document grammar:
    ///
    /// ```text
    /// Topic: <text>                 (optional)
    /// Objectives:
    /// - <text>
    /// Stages:
    /// 1. <name>: <description>
    ///    Criterion: <text>
    /// ```
    ///
    /// Stages are numbered from 1 without gaps; every stage line is followed
    /// by its criterion line. Blank lines are ignored, anything else is an
    /// error. The topic always comes from the caller.
    pub fn parse(topic: &str, text: &str) -> Result<TeachingPlan, AgentError> {
        let mut section = Section::Preamble;
        let mut objectives = Vec::new();
        let mut stages: Vec<Stage> = Vec::new();
        let mut awaiting_criterion = false;
        let mut saw_objectives = false;
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if awaiting_criterion {
                let criterion = line
                    .strip_prefix("Criterion:")
                    .map(str::trim)
                    .filter(|c| !c.is_empty())
                    .ok_or_else(|| plan_error(n, "expected `Criterion: <text>`"))?;
                stages.last_mut().expect("stage pending").completion_criterion = criterion.to_string();
                awaiting_criterion = false;
                continue;
            }
            if line.eq_ignore_ascii_case("Objectives:") {
                if section != Section::Preamble {
                    return Err(plan_error(n, "Objectives: out of place"));
                }
                section = Section::Objectives;
                saw_objectives = true;
                continue;
            }
            if line.eq_ignore_ascii_case("Stages:") {
                if section == Section::Stages {
                    return Err(plan_error(n, "duplicate Stages:"));
                }
                section = Section::Stages;
                continue;
            }
            match section {
                Section::Preamble => {
                    if line.strip_prefix("Topic:").is_none() {
                        return Err(plan_error(n, format!("unexpected line {line:?}")));
                    }
                }
                Section::Objectives => {
                    let objective = line
                        .strip_prefix("- ")
                        .map(str::trim)
                        .filter(|o| !o.is_empty())
                        .ok_or_else(|| plan_error(n, "objectives must be `- <text>` lines"))?;
                    objectives.push(objective.to_string());
                }
                Section::Stages => {
                    let caps = STAGE_LINE
                        .captures(line)
                        .ok_or_else(|| plan_error(n, "expected `<number>. <name>: <description>`"))?;
                    let number: usize = caps[1].parse().map_err(|_| plan_error(n, "bad stage number"))?;
                    if number != stages.len() + 1 {
                        return Err(plan_error(n, format!("expected stage {}, found {number}", stages.len() + 1)));
                    }
                    stages.push(Stage {
                        name: caps[2].trim().to_string(),
                        description: caps[3].trim().to_string(),
                        completion_criterion: String::new(),
                    });
                    awaiting_criterion = true;
                }
            }
        }
        if awaiting_criterion {
            return Err(AgentError::PlanParse("last stage has no criterion".into()));
        }
        if !saw_objectives {
            return Err(AgentError::PlanParse("missing Objectives: section".into()));
        }
        let plan = TeachingPlan {
            topic: topic.to_string(),
            objectives,
            stages,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn render(&self) -> String {
        let mut out = format!("Topic: {}\nObjectives:\n", self.topic);
        for o in &self.objectives {
            out.push_str(&format!("- {o}\n"));
        }
        out.push_str("Stages:\n");
        for (i, s) in self.stages.iter().enumerate() {
            out.push_str(&format!("{}. {}: {}\n   Criterion: {}\n", i + 1, s.name, s.description, s.completion_criterion));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const THREE: &str = "Topic: Concept of the Quadratic Equation\nObjectives:\n- Recognise the general form\n- Identify a, b and c\nStages:\n1. Introduction: Greet and motivate the class\n   Criterion: Students know today's topic\n2. Exploration: Derive the general form together\n   Criterion: A student states ax^2 + bx + c = 0\n3. Practice: Solve examples\n   Criterion: Two examples solved\n";

    #[test]
    fn parses_three_stage_plan() {
        let plan = TeachingPlan::parse("Concept of the Quadratic Equation", THREE).unwrap();
        assert_eq!(plan.stages.len(), 3);
        assert_eq!(plan.topic, "Concept of the Quadratic Equation");
        assert_eq!(plan.stages[1].completion_criterion, "A student states ax^2 + bx + c = 0");
        assert_eq!(plan.objectives.len(), 2);
    }

    #[test]
    fn strict_errors() {
        let no_stages = "Objectives:\n- x\nStages:\n";
        assert!(matches!(TeachingPlan::parse("t", no_stages), Err(AgentError::PlanParse(_))));
        assert!(TeachingPlan::parse("t", "Sure! Here is the plan:\nObjectives:\n- x\nStages:\n1. A: b\n   Criterion: c").is_err());
        assert!(TeachingPlan::parse("t", "Objectives:\n- x\nStages:\n2. A: b\n   Criterion: c").is_err());
        assert!(TeachingPlan::parse("t", "Objectives:\n- x\nStages:\n1. A: b\n").is_err());
        assert!(TeachingPlan::parse("t", "Objectives:\n- x\nStages:\n1. A: b\n   Criterion: c\n2. A: d\n   Criterion: e").is_err());
        assert!(TeachingPlan::parse("t", "Stages:\n1. A: b\n   Criterion: c").is_err());
    }

    fn text() -> impl Strategy<Value = String> {
        "[A-Za-z][A-Za-z0-9 ,']{0,20}[A-Za-z0-9]".prop_map(|s| s)
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(
            topic in text(),
            objectives in prop::collection::vec(text(), 0..4),
            stages in prop::collection::vec((text(), text(), text()), 1..6),
        ) {
            let stages: Vec<Stage> = stages
                .into_iter()
                .enumerate()
                .map(|(i, (n, d, c))| Stage { name: format!("{n}{i}"), description: d, completion_criterion: c })
                .collect();
            let plan = TeachingPlan { topic: topic.clone(), objectives, stages };
            prop_assert_eq!(TeachingPlan::parse(&topic, &plan.render()).unwrap(), plan);
        }
    }
}
