//! Core of skillforge: skill definitions, the quantified skill graph, plan
//! search, a seeded crafting gridworld, intrinsic rewards, tabular skill
//! learners and the evaluation harness. Runs without `std`; only `alloc` is
//! needed.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod graph;
pub mod harness;
pub mod learner;
pub mod planner;
pub mod rewards;
pub mod skilldef;
pub mod synth;
pub mod world;

pub use graph::{build_graph, DependencyEdge, EdgeMode, GraphError, SkillGraph};
pub use planner::{
    dfs_expand, estimate_budget, replan_and_execute, search_plan, symbolic_execute, Condition, EpisodeResult, Plan,
    PlanError, SkillExecutor, SkillOutcome, Task,
};
pub use skilldef::{
    parse_response, parse_skill_file, serialize_skill_file, validate_against_db, Discrepancy, ItemId, ParseMode,
    SkillDefinition, SkillError, SkillKind,
};
