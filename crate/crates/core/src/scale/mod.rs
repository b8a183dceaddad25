//! Tree-structured persona inventories.
//!
//! A scale is a rooted tree whose nodes pair a description with a score (or
//! an A/B choice). Trees are loaded from JSON, validated, handed to agents in
//! depth-first order, and spot-checked later to catch persona drift.

mod persona;
mod tree;

pub use persona::{
    assign_dfs, consistency_check, parse_probe_answer, probe_question, render_persona_prompt,
    AssignmentRecord, CheckError, CheckOutcome, ConsistencyReport, Delivery, PersonaProbe,
    PersonaProfile, PersonaSink, ProfileError,
};
pub use tree::{
    load_scale, load_scale_with, Choice, Instrument, LoadMode, NodeId, NodeValue, ScaleDocument,
    ScaleError, ScaleKind, ScaleNode, ScaleTree,
};
