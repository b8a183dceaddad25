//! The lesson's stage bookkeeping, free of any I/O.

use serde::{Deserialize, Serialize};

use super::{Limits, Termination};
use crate::agents::SignalValue;

/// Why a stage boundary was crossed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cause {
    Supervisor,
    StageCap,
    User,
}

/// What a step did to the lesson. Both fields can be set: a capped stage can
/// advance on the very turn that also exhausts `max_turns`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Step {
    pub advanced: Option<(usize, usize, Cause)>,
    pub ended: Option<Termination>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageMachine {
    stages: usize,
    stage: usize,
    stage_turns: u64,
    turns: u64,
    max_stage_turns: u64,
    max_turns: u64,
    ended: Option<Termination>,
    completed: usize,
}

impl StageMachine {
    /// `stages` must be at least 1.
    pub fn new(stages: usize, limits: &Limits) -> Self {
        assert!(stages > 0, "a lesson needs a stage");
        Self {
            stages,
            stage: 0,
            stage_turns: 0,
            turns: 0,
            max_stage_turns: limits.max_stage_turns,
            max_turns: limits.max_turns,
            ended: None,
            completed: 0,
        }
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn is_final(&self) -> bool {
        self.stage + 1 == self.stages
    }

    pub fn ended(&self) -> Option<Termination> {
        self.ended
    }

    pub fn stages_completed(&self) -> usize {
        self.completed
    }

    pub fn teacher_turns(&self) -> u64 {
        self.turns
    }

    fn advance(&mut self, cause: Cause) -> Step {
        let from = self.stage;
        self.stage += 1;
        self.stage_turns = 0;
        self.completed = self.stage;
        Step {
            advanced: Some((from, self.stage, cause)),
            ended: None,
        }
    }

    fn end(&mut self, termination: Termination, step: &mut Step) {
        self.ended = Some(termination);
        step.ended = Some(termination);
    }

    /// Applies the supervisor's signal at the end of a teacher turn, then the
    /// per-stage and whole-lesson caps.
    pub fn on_signal(&mut self, value: SignalValue) -> Step {
        if self.ended.is_some() {
            return Step::default();
        }
        self.stage_turns += 1;
        self.turns += 1;
        let mut step = Step::default();
        match value {
            SignalValue::EndLesson => {
                self.completed = self.stages;
                self.end(Termination::SupervisorEnd, &mut step);
            }
            SignalValue::AdvanceStage if self.is_final() => {
                self.completed = self.stages;
                self.end(Termination::SupervisorEnd, &mut step);
            }
            SignalValue::AdvanceStage => step = self.advance(Cause::Supervisor),
            SignalValue::Continue if self.stage_turns >= self.max_stage_turns => {
                if self.is_final() {
                    self.end(Termination::MaxTurns, &mut step);
                } else {
                    step = self.advance(Cause::StageCap);
                }
            }
            SignalValue::Continue => {}
        }
        if self.ended.is_none() && self.turns >= self.max_turns {
            self.end(Termination::MaxTurns, &mut step);
        }
        step
    }

    /// A user `advance`: the next stage, or the end after the final one.
    pub fn user_advance(&mut self) -> Step {
        if self.ended.is_some() {
            return Step::default();
        }
        if self.is_final() {
            self.completed = self.stages;
            let mut step = Step::default();
            self.end(Termination::UserEnd, &mut step);
            step
        } else {
            self.advance(Cause::User)
        }
    }

    pub fn user_end(&mut self) -> Step {
        let mut step = Step::default();
        if self.ended.is_none() {
            self.end(Termination::UserEnd, &mut step);
        }
        step
    }
}
