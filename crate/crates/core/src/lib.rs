//! Multi-agent classroom interaction engine.
//!
//! Role agents carry tree-structured personas ([`scale`]) and an
//! ACT*-style memory/reflection/planning loop ([`cognition`]). General
//! agents ([`agents`]) plan the lesson, supervise stage changes, check persona
//! consistency and pick who answers. The [`orchestrator`] runs a scenario
//! into a JSONL transcript, which [`analysis`] scores with the Flanders
//! interaction categories.

pub mod agents;
pub mod analysis;
pub mod cognition;
pub mod lm_backend;
pub mod orchestrator;
pub mod scale;
