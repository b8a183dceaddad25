use std::path::Path;

use async_trait::async_trait;
use rand::seq::IndexedRandom;
use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::LazyLock;
use thiserror::Error;

use super::tree::{Choice, LoadMode, NodeId, NodeValue, ScaleDocument, ScaleError, ScaleKind, ScaleNode, ScaleTree};
use crate::lm_backend::BackendError;

/// A role agent's identity: who they are plus their scales.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PersonaProfile {
    pub agent_name: String,
    pub career: String,
    pub basic_info: String,
    pub scales: Vec<ScaleTree>,
}

/// A scale given either inline or as a path relative to the profile file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ScaleRef {
    Path(String),
    Inline(ScaleDocument),
}

#[derive(Debug, Deserialize)]
struct ProfileDocument {
    name: String,
    career: String,
    #[serde(default)]
    basic_info: String,
    #[serde(default)]
    scales: Vec<ScaleRef>,
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: profile does not parse: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: field `{field}`: {message}")]
    Invalid {
        path: String,
        field: String,
        message: String,
    },
    #[error("{path}: scale {index}: {source}")]
    Scale {
        path: String,
        index: usize,
        #[source]
        source: ScaleError,
    },
}

fn log_warnings(path: &str, warnings: &[String]) {
    for w in warnings {
        tracing::warn!(path, "{w}");
    }
}

const RESERVED_NAMES: [&str; 2] = ["system", "user"];

impl PersonaProfile {
    pub fn load(path: &Path) -> Result<Self, ProfileError> {
        Self::load_with(path, LoadMode::Strict)
    }

    /// Loads a profile; in lenient mode instrument shape problems are logged
    /// instead of rejected.
    pub fn load_with(path: &Path, mode: LoadMode) -> Result<Self, ProfileError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ProfileError::Io {
            path: shown.clone(),
            message: e.to_string(),
        })?;
        let doc: ProfileDocument = serde_json::from_str(&text).map_err(|e| ProfileError::Parse {
            path: shown.clone(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut scales = Vec::with_capacity(doc.scales.len());
        for (index, r) in doc.scales.into_iter().enumerate() {
            let tree = match r {
                ScaleRef::Inline(d) => {
                    let (tree, warnings) =
                        ScaleTree::from_document(d, mode).map_err(|source| ProfileError::Scale {
                            path: shown.clone(),
                            index,
                            source,
                        })?;
                    log_warnings(&shown, &warnings);
                    tree
                }
                ScaleRef::Path(p) => {
                    let scale_path = base.join(&p);
                    let text = std::fs::read_to_string(&scale_path).map_err(|e| ProfileError::Io {
                        path: scale_path.display().to_string(),
                        message: e.to_string(),
                    })?;
                    let (tree, warnings) =
                        super::load_scale_with(&text, mode).map_err(|source| ProfileError::Scale {
                            path: scale_path.display().to_string(),
                            index,
                            source,
                        })?;
                    log_warnings(&scale_path.display().to_string(), &warnings);
                    tree
                }
            };
            scales.push(tree);
        }
        Self::new(doc.name, doc.career, doc.basic_info, scales).map_err(|(field, message)| {
            ProfileError::Invalid {
                path: shown,
                field,
                message,
            }
        })
    }

    pub fn new(
        agent_name: impl Into<String>,
        career: impl Into<String>,
        basic_info: impl Into<String>,
        scales: Vec<ScaleTree>,
    ) -> Result<Self, (String, String)> {
        let agent_name = agent_name.into();
        if agent_name.trim().is_empty() {
            return Err(("name".into(), "empty".into()));
        }
        if RESERVED_NAMES.contains(&agent_name.to_lowercase().as_str()) {
            return Err(("name".into(), format!("{agent_name:?} is reserved")));
        }
        Ok(Self {
            agent_name,
            career: career.into(),
            basic_info: basic_info.into(),
            scales,
        })
    }

    pub fn scale(&self, name: &str) -> Option<&ScaleTree> {
        self.scales.iter().find(|s| s.name() == name)
    }
}

fn value_text(node: &ScaleNode) -> String {
    match (node.value(), node.score_range) {
        (Some(NodeValue::Score(s)), Some((lo, hi))) => format!("{s} (range {lo}-{hi})"),
        (Some(v), _) => v.to_string(),
        (None, _) => "-".to_string(),
    }
}

/// Serializes a profile into the agent's system context. Each scale node
/// yields exactly one line, in the same depth-first order personas are
/// assigned.
pub fn render_persona_prompt(profile: &PersonaProfile) -> String {
    let mut out = format!(
        "Name: {}\nCareer: {}\nBasic information: {}\n",
        profile.agent_name, profile.career, profile.basic_info
    );
    for scale in &profile.scales {
        out.push('\n');
        out.push_str(&format!("{}:\n", scale.name()));
        for id in scale.dfs_order() {
            let node = scale.node(&id).expect("dfs yields known ids");
            let indent = "  ".repeat(scale.depth(&id));
            out.push_str(&format!(
                "{indent}- [{}] {}: {}\n",
                node.id,
                node.description,
                value_text(node)
            ));
        }
    }
    out
}

/// One (description, value) pair handed to an agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub scale: String,
    pub node: NodeId,
    pub description: String,
    pub value: Option<NodeValue>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub deliveries: Vec<Delivery>,
}

/// Anything that can be told its persona one trait at a time.
pub trait PersonaSink {
    fn receive(&mut self, delivery: &Delivery);
}

impl PersonaSink for Vec<Delivery> {
    fn receive(&mut self, delivery: &Delivery) {
        self.push(delivery.clone());
    }
}

/// Stack-driven depth-first assignment. Children are pushed in reverse so
/// they pop in document order.
pub fn assign_dfs(tree: &ScaleTree, agent: &mut dyn PersonaSink) -> AssignmentRecord {
    let mut record = AssignmentRecord::default();
    let mut stack: Vec<&ScaleNode> = vec![tree.root()];
    while let Some(node) = stack.pop() {
        let delivery = Delivery {
            scale: tree.name().to_string(),
            node: node.id.clone(),
            description: node.description.clone(),
            value: node.value(),
        };
        agent.receive(&delivery);
        record.deliveries.push(delivery);
        let children: Vec<&ScaleNode> = tree.children(&node.id).collect();
        stack.extend(children.into_iter().rev());
    }
    record
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckOutcome {
    Pass,
    FailedCoarse,
    FailedFine,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub scale: String,
    pub tested_coarse: Vec<NodeId>,
    pub tested_fine: Vec<NodeId>,
    pub outcome: CheckOutcome,
    pub restored: bool,
    pub queries_issued: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restoration: Option<String>,
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("cannot test {m} coarse traits, scale {scale:?} has only {available}")]
    TooMany {
        scale: String,
        m: usize,
        available: usize,
    },
    #[error("persona query failed: {0}")]
    Query(#[from] BackendError),
}

/// The query side of an agent: it can be asked about itself and reminded.
#[async_trait]
pub trait PersonaProbe: Send {
    async fn answer_probe(&mut self, question: &str) -> Result<String, BackendError>;
    fn restore(&mut self, message: &str);
}

pub fn probe_question(tree: &ScaleTree, node: &ScaleNode) -> String {
    match tree.kind() {
        ScaleKind::ScoreBased => {
            let range = node
                .score_range
                .map(|(lo, hi)| format!(" (range {lo}-{hi})"))
                .unwrap_or_default();
            format!(
                "Persona self-check on \"{}\". Node {}: \"{}\". What is your score for this item{}? Reply with the number only.",
                tree.name(),
                node.id,
                node.description,
                range
            )
        }
        ScaleKind::ChoiceBased => format!(
            "Persona self-check on \"{}\". Node {}: \"{}\". Which option describes you, A or B? Reply with the letter only.",
            tree.name(),
            node.id,
            node.description
        ),
    }
}

static INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-?\d+").expect("static regex"));
static UPPER_CHOICE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([AB])\b").expect("static regex"));
static LOWER_CHOICE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\(([ab])\)|^\s*([ab])\b").expect("static regex"));

/// Extracts the value from a free-text reply: the first integer token for
/// score-based scales, the first standalone A/B for choice-based ones.
pub fn parse_probe_answer(kind: ScaleKind, reply: &str) -> Option<NodeValue> {
    match kind {
        ScaleKind::ScoreBased => INTEGER
            .find(reply)
            .and_then(|m| m.as_str().parse().ok())
            .map(NodeValue::Score),
        ScaleKind::ChoiceBased => {
            let letter = UPPER_CHOICE
                .captures(reply)
                .and_then(|c| c.get(1))
                .or_else(|| {
                    LOWER_CHOICE
                        .captures(reply)
                        .and_then(|c| c.get(1).or(c.get(2)))
                })?
                .as_str()
                .to_ascii_uppercase();
            Some(NodeValue::Choice(if letter == "A" { Choice::A } else { Choice::B }))
        }
    }
}

fn restoration_message(tree: &ScaleTree, nodes: &[&ScaleNode]) -> String {
    let mut msg = format!(
        "Persona restoration for \"{}\". Your true values are:\n",
        tree.name()
    );
    for node in nodes {
        msg.push_str(&format!("- [{}] {}: {}\n", node.id, node.description, value_text(node)));
    }
    msg
}

/// Two-stage random persona test.
///
/// Stage one asks for `m` distinct coarse traits. Only when every answer is
/// exact does stage two ask one random leaf under each tested trait. Any
/// mismatch (an unparseable reply counts) sends the agent the true values of
/// every node selected so far.
pub async fn consistency_check<A, R>(
    agent: &mut A,
    tree: &ScaleTree,
    m: usize,
    rng: &mut R,
) -> Result<ConsistencyReport, CheckError>
where
    A: PersonaProbe + ?Sized,
    R: Rng + ?Sized,
{
    let coarse = tree.coarse_nodes();
    if m > coarse.len() {
        return Err(CheckError::TooMany {
            scale: tree.name().to_string(),
            m,
            available: coarse.len(),
        });
    }
    let selected: Vec<&ScaleNode> = coarse.choose_multiple(rng, m).copied().collect();
    let mut report = ConsistencyReport {
        scale: tree.name().to_string(),
        tested_coarse: selected.iter().map(|n| n.id.clone()).collect(),
        tested_fine: Vec::new(),
        outcome: CheckOutcome::Pass,
        restored: false,
        queries_issued: 0,
        restoration: None,
    };

    let mut all_match = true;
    for node in &selected {
        all_match &= ask(agent, tree, node, &mut report).await?;
    }
    let mut asked: Vec<&ScaleNode> = selected.clone();
    if !all_match {
        report.outcome = CheckOutcome::FailedCoarse;
    } else {
        let fine: Vec<&ScaleNode> = selected
            .iter()
            .filter_map(|c| {
                let kids: Vec<&ScaleNode> = tree.children(&c.id).collect();
                kids.choose(rng).copied()
            })
            .collect();
        report.tested_fine = fine.iter().map(|n| n.id.clone()).collect();
        for node in &fine {
            all_match &= ask(agent, tree, node, &mut report).await?;
        }
        asked.extend(fine);
        if !all_match {
            report.outcome = CheckOutcome::FailedFine;
        }
    }

    if report.outcome != CheckOutcome::Pass {
        let message = restoration_message(tree, &asked);
        agent.restore(&message);
        report.restored = true;
        report.restoration = Some(message);
    }
    Ok(report)
}

async fn ask<A: PersonaProbe + ?Sized>(
    agent: &mut A,
    tree: &ScaleTree,
    node: &ScaleNode,
    report: &mut ConsistencyReport,
) -> Result<bool, CheckError> {
    let reply = agent.answer_probe(&probe_question(tree, node)).await?;
    report.queries_issued += 1;
    let parsed = parse_probe_answer(tree.kind(), &reply);
    let matched = parsed.is_some() && parsed == node.value();
    if !matched {
        tracing::info!(scale = tree.name(), node = %node.id, reply = %reply, "persona drift detected");
    }
    Ok(matched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_tree() -> ScaleTree {
        let json = r#"{
            "name": "Mini", "kind": "score_based", "root": "root",
            "nodes": [
                {"id": "root", "description": "root", "children": ["A", "B"]},
                {"id": "A", "description": "trait A", "children": ["A1", "A2"]},
                {"id": "A1", "description": "facet A1", "score": 2, "range": [1, 5]},
                {"id": "A2", "description": "facet A2", "score": 4, "range": [1, 5]},
                {"id": "B", "description": "trait B", "children": ["B1"]},
                {"id": "B1", "description": "facet B1", "score": 5, "range": [1, 5]}
            ]
        }"#;
        crate::scale::load_scale(json).unwrap()
    }

    /// Answers from a lookup of node id to reply text.
    struct Scripted {
        tree: ScaleTree,
        lie_about: Option<(String, i64)>,
        asked: Vec<String>,
        restorations: Vec<String>,
    }

    #[async_trait]
    impl PersonaProbe for Scripted {
        async fn answer_probe(&mut self, question: &str) -> Result<String, BackendError> {
            self.asked.push(question.to_string());
            let id = question
                .split("Node ")
                .nth(1)
                .and_then(|s| s.split(':').next())
                .unwrap()
                .to_string();
            if let Some((lie, delta)) = &self.lie_about {
                if lie == &id {
                    let truth = self.tree.node(&id).unwrap().score.unwrap();
                    return Ok(format!("I'd say {}", truth + delta));
                }
            }
            Ok(self.tree.node(&id).unwrap().value().unwrap().to_string())
        }

        fn restore(&mut self, message: &str) {
            self.restorations.push(message.to_string());
        }
    }

    fn agent(tree: &ScaleTree, lie: Option<(&str, i64)>) -> Scripted {
        Scripted {
            tree: tree.clone(),
            lie_about: lie.map(|(id, d)| (id.to_string(), d)),
            asked: vec![],
            restorations: vec![],
        }
    }

    #[test]
    fn dfs_assignment_follows_document_order() {
        let tree = small_tree();
        let mut sink: Vec<Delivery> = Vec::new();
        let record = assign_dfs(&tree, &mut sink);
        let order: Vec<&str> = record.deliveries.iter().map(|d| d.node.as_str()).collect();
        assert_eq!(order, vec!["root", "A", "A1", "A2", "B", "B1"]);
        assert_eq!(sink, record.deliveries);
        assert_eq!(record.deliveries[1].value, Some(NodeValue::Score(6)));
    }

    #[test]
    fn single_node_assignment() {
        let tree = crate::scale::load_scale(
            r#"{"name":"One","kind":"score_based","root":"r","nodes":[{"id":"r","description":"only"}]}"#,
        )
        .unwrap();
        let mut sink: Vec<Delivery> = Vec::new();
        let record = assign_dfs(&tree, &mut sink);
        assert_eq!(record.deliveries.len(), 1);
        assert_eq!(record.deliveries[0].node, "r");
    }

    #[tokio::test]
    async fn truthful_agent_passes_with_2m_queries() {
        let tree = small_tree();
        let mut a = agent(&tree, None);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = consistency_check(&mut a, &tree, 2, &mut rng).await.unwrap();
        assert_eq!(r.outcome, CheckOutcome::Pass);
        assert!(!r.restored);
        assert_eq!(r.queries_issued, 4);
        assert_eq!(r.tested_fine.len(), 2);
        assert!(a.restorations.is_empty());
    }

    #[tokio::test]
    async fn m_zero_is_vacuous() {
        let tree = small_tree();
        let mut a = agent(&tree, None);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = consistency_check(&mut a, &tree, 0, &mut rng).await.unwrap();
        assert_eq!((r.outcome, r.restored, r.queries_issued), (CheckOutcome::Pass, false, 0));
    }

    #[tokio::test]
    async fn coarse_mismatch_restores_selected_nodes() {
        let tree = small_tree();
        let mut a = agent(&tree, Some(("A", 1)));
        // m = 2 so both coarse nodes are always selected.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = consistency_check(&mut a, &tree, 2, &mut rng).await.unwrap();
        assert_eq!(r.outcome, CheckOutcome::FailedCoarse);
        assert!(r.restored);
        assert_eq!(r.queries_issued, 2);
        let msg = &a.restorations[0];
        assert!(msg.contains("[A] trait A: 6"));
        assert!(msg.contains("[B] trait B: 5"));
    }

    #[tokio::test]
    async fn fine_mismatch_reported() {
        let tree = small_tree();
        // B has one child, so B1 is always tested when B is.
        let mut a = agent(&tree, Some(("B1", -2)));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = consistency_check(&mut a, &tree, 2, &mut rng).await.unwrap();
        assert_eq!(r.outcome, CheckOutcome::FailedFine);
        assert_eq!(r.queries_issued, 4);
        assert!(a.restorations[0].contains("[B1] facet B1: 5"));
    }

    #[tokio::test]
    async fn too_many_coarse_nodes() {
        let tree = small_tree();
        let mut a = agent(&tree, None);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            consistency_check(&mut a, &tree, 3, &mut rng).await,
            Err(CheckError::TooMany { available: 2, .. })
        ));
    }

    #[test]
    fn answer_parsing() {
        assert_eq!(parse_probe_answer(ScaleKind::ScoreBased, "My score is 17 out of 25"), Some(NodeValue::Score(17)));
        assert_eq!(parse_probe_answer(ScaleKind::ScoreBased, "no idea"), None);
        assert_eq!(parse_probe_answer(ScaleKind::ChoiceBased, "B"), Some(NodeValue::Choice(Choice::B)));
        assert_eq!(parse_probe_answer(ScaleKind::ChoiceBased, "I pick (a)."), Some(NodeValue::Choice(Choice::A)));
        assert_eq!(parse_probe_answer(ScaleKind::ChoiceBased, "Because it is a habit"), None);
    }

    #[test]
    fn render_is_deterministic_and_complete() {
        let tree = small_tree();
        let profile = PersonaProfile::new("Emily", "Student", "Grade 9", vec![tree.clone()]).unwrap();
        let a = render_persona_prompt(&profile);
        assert_eq!(a, render_persona_prompt(&profile));
        for node in tree.nodes() {
            assert_eq!(a.matches(&format!("[{}] {}:", node.id, node.description)).count(), 1);
        }
        assert!(a.contains("    - [A1] facet A1: 2 (range 1-5)"));
    }

    #[test]
    fn render_without_scales() {
        let profile = PersonaProfile::new("Mrs. Smith", "Teacher", "Math teacher", vec![]).unwrap();
        assert_eq!(
            render_persona_prompt(&profile),
            "Name: Mrs. Smith\nCareer: Teacher\nBasic information: Math teacher\n"
        );
    }

    #[test]
    fn reserved_names_rejected() {
        assert!(PersonaProfile::new("system", "x", "y", vec![]).is_err());
        assert!(PersonaProfile::new(" ", "x", "y", vec![]).is_err());
    }
}
