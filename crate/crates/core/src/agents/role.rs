use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{AgentError, AgentId};
use crate::cognition::{CognitiveState, Mind, PromptTemplates, SkillLibrary};
use crate::lm_backend::{tags, Backend, BackendError, LmRequest, Sampling};
use crate::scale::{
    assign_dfs, render_persona_prompt, AssignmentRecord, Delivery, PersonaProbe, PersonaProfile,
    PersonaSink,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Teacher,
    Student,
}

/// Construction knobs shared by every role agent of a scenario.
#[derive(Clone)]
pub struct RoleAgentSettings {
    pub backend: Backend,
    pub templates: Arc<PromptTemplates>,
    pub skills: Arc<SkillLibrary>,
    pub working_capacity: usize,
    pub skill_k: Option<usize>,
    pub distill_every: u64,
    pub sampling: Sampling,
}

/// A = {T, B}: a persona profile (T) driving a cognitive state (B).
pub struct RoleAgent {
    id: AgentId,
    role: AgentRole,
    profile: PersonaProfile,
    received: Vec<Delivery>,
    persona: String,
    reminders: Vec<String>,
    cognition: CognitiveState,
    backend: Backend,
    templates: Arc<PromptTemplates>,
    sampling: Sampling,
    skill_k: Option<usize>,
}

impl std::fmt::Debug for RoleAgent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RoleAgent")
            .field("id", &self.id)
            .field("role", &self.role)
            .field("deliveries", &self.received.len())
            .finish()
    }
}

impl RoleAgent {
    pub fn new(profile: PersonaProfile, role: AgentRole, settings: &RoleAgentSettings) -> Self {
        Self {
            id: AgentId::new(profile.agent_name.clone()),
            role,
            profile,
            received: Vec::new(),
            persona: String::new(),
            reminders: Vec::new(),
            cognition: CognitiveState::new(settings.working_capacity, settings.skills.clone())
                .with_distill_every(settings.distill_every),
            backend: settings.backend.clone(),
            templates: settings.templates.clone(),
            sampling: settings.sampling,
            skill_k: settings.skill_k,
        }
    }

    pub fn id(&self) -> &AgentId {
        &self.id
    }

    pub fn role(&self) -> AgentRole {
        self.role
    }

    pub fn profile(&self) -> &PersonaProfile {
        &self.profile
    }

    pub fn cognition(&self) -> &CognitiveState {
        &self.cognition
    }

    pub fn cognition_mut(&mut self) -> &mut CognitiveState {
        &mut self.cognition
    }

    pub fn deliveries(&self) -> &[Delivery] {
        &self.received
    }

    pub fn reminders(&self) -> &[String] {
        &self.reminders
    }

    /// Hands every scale to the agent in depth-first order, then fixes the
    /// persona text the agent speaks from.
    pub fn assign_persona(&mut self) -> Vec<AssignmentRecord> {
        self.received.clear();
        let scales = self.profile.scales.clone();
        let records = scales.iter().map(|tree| assign_dfs(tree, self)).collect();
        self.persona = render_persona_prompt(&self.profile);
        records
    }

    /// The rendered persona alone (empty before assignment).
    pub fn persona(&self) -> &str {
        &self.persona
    }

    /// System preamble for every call the agent makes.
    pub fn system_prompt(&self) -> String {
        let role = match self.role {
            AgentRole::Teacher => "the teacher",
            AgentRole::Student => "a student",
        };
        let mut out = format!(
            "You are {}, {role} in a virtual classroom. Stay in character.\n\n{}",
            self.id, self.persona
        );
        if !self.reminders.is_empty() {
            out.push_str("\n## Persona reminders\n");
            for r in &self.reminders {
                out.push_str(r);
                if !r.ends_with('\n') {
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn perceive(&mut self, turn: u64, observation: &str) -> Result<(), AgentError> {
        Ok(self.cognition.perceive(turn, observation)?)
    }

    /// One cognitive cycle; returns the draft utterance.
    pub async fn cycle(&mut self, turn: u64) -> Result<String, AgentError> {
        let system = self.system_prompt();
        let mind = Mind {
            backend: &*self.backend,
            templates: &self.templates,
            persona: &system,
            sampling: self.sampling,
            skill_k: self.skill_k,
        };
        Ok(self.cognition.cycle(turn, &mind).await?)
    }

    /// Redrafts the turn's utterance with a correction note, reusing the
    /// reflection and plan already made for `turn`.
    pub async fn regenerate(&mut self, turn: u64, note: &str) -> Result<String, AgentError> {
        let system = self.system_prompt();
        let mind = Mind {
            backend: &*self.backend,
            templates: &self.templates,
            persona: &system,
            sampling: self.sampling,
            skill_k: self.skill_k,
        };
        Ok(self.cognition.act(turn, &mind, Some(note)).await?)
    }
}

impl PersonaSink for RoleAgent {
    fn receive(&mut self, delivery: &Delivery) {
        self.received.push(delivery.clone());
    }
}

#[async_trait]
impl PersonaProbe for RoleAgent {
    async fn answer_probe(&mut self, question: &str) -> Result<String, BackendError> {
        let request = LmRequest::single(tags::PERSONA_PROBE, self.system_prompt(), question, self.sampling);
        Ok(self.backend.complete(&request).await?.text)
    }

    fn restore(&mut self, message: &str) {
        self.reminders.push(message.to_string());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm_backend::{Instrumented, ScriptEntry, ScriptedBackend};
    use crate::scale::{consistency_check, load_scale, CheckOutcome};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TREE: &str = r#"{"name":"Mini","kind":"score_based","root":"R","nodes":[
        {"id":"R","description":"root","children":["X","Y"]},
        {"id":"X","description":"Extraversion","range":[2,10],"children":["X1","X2"]},
        {"id":"X1","description":"Talkative","score":4,"range":[1,5]},
        {"id":"X2","description":"Outgoing","score":3,"range":[1,5]},
        {"id":"Y","description":"Neuroticism","range":[2,10],"children":["Y1","Y2"]},
        {"id":"Y1","description":"Anxious","score":5,"range":[1,5]},
        {"id":"Y2","description":"Moody","score":2,"range":[1,5]}]}"#;

    fn settings(backend: Backend) -> RoleAgentSettings {
        RoleAgentSettings {
            backend,
            templates: Arc::new(PromptTemplates::default()),
            skills: Arc::new(SkillLibrary::default()),
            working_capacity: 20,
            skill_k: Some(3),
            distill_every: 1,
            sampling: Sampling::ROLE,
        }
    }

    fn profile() -> PersonaProfile {
        PersonaProfile::new("Emily", "student", "Ninth grade.", vec![load_scale(TREE).unwrap()]).unwrap()
    }

    #[test]
    fn assignment_delivers_every_node_in_dfs_order() {
        let backend: Backend = Arc::new(ScriptedBackend::new(vec![]).unwrap());
        let mut agent = RoleAgent::new(profile(), AgentRole::Student, &settings(backend));
        assert!(agent.persona().is_empty());
        let records = agent.assign_persona();
        let order: Vec<&str> = agent.deliveries().iter().map(|d| d.node.as_str()).collect();
        assert_eq!(order, ["R", "X", "X1", "X2", "Y", "Y1", "Y2"]);
        assert_eq!(records[0].deliveries.len(), 7);
        assert_eq!(agent.persona(), render_persona_prompt(agent.profile()));
        assert!(agent.system_prompt().starts_with("You are Emily, a student"));
    }

    #[tokio::test]
    async fn drifting_agent_is_restored_and_reminded() {
        let script = vec![
            ScriptEntry::substring("Node X:", "9").for_tag(tags::PERSONA_PROBE),
            ScriptEntry::substring("Node Y:", "7").for_tag(tags::PERSONA_PROBE),
        ];
        let log = Arc::new(Instrumented::new(Arc::new(ScriptedBackend::new(script).unwrap())));
        let mut agent = RoleAgent::new(profile(), AgentRole::Student, &settings(log.clone()));
        agent.assign_persona();
        let tree = agent.profile().scales[0].clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let report = consistency_check(&mut agent, &tree, 2, &mut rng).await.unwrap();
        assert_eq!(report.outcome, CheckOutcome::FailedCoarse);
        assert!(report.restored);
        assert_eq!(agent.reminders().len(), 1);
        assert!(agent.system_prompt().contains("## Persona reminders\nPersona restoration"));
        assert_eq!(log.tags(), vec![tags::PERSONA_PROBE.to_string(); 2]);
    }

    #[tokio::test]
    async fn first_cycle_is_a_single_act_call() {
        let script = vec![ScriptEntry::substring("Reply with the spoken words only.", "Hi!").for_tag(tags::ACT)];
        let log = Arc::new(Instrumented::new(Arc::new(ScriptedBackend::new(script).unwrap())));
        let mut agent = RoleAgent::new(profile(), AgentRole::Student, &settings(log.clone()));
        agent.assign_persona();
        agent.perceive(0, "Teacher: Good morning.").unwrap();
        assert_eq!(agent.cycle(0).await.unwrap(), "Hi!");
        assert_eq!(log.tags(), vec![tags::ACT.to_string()]);
        assert!(log.calls()[0].request.system.contains("[X1] Talkative: 4"));
    }
}
