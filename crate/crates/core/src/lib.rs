//! Temporal multitask scheduling over recipe task graphs.
//!
//! Recipes are graphs of timed actions. Autonomous actions run unattended,
//! continuous ones occupy the single agent, and interruptible continuous
//! actions may be split. Dependencies, shared resources with conditions and
//! maximum time lags between actions constrain every schedule.
//!
//! - [`model`]: recipes, actions, constraints and instances
//! - [`dsl`]: the recipe document format and the agent command grammar
//! - [`sim`]: the environment that judges commands and renders feedback
//! - [`sched`]: heuristic, greedy and exact schedulers
//! - [`metrics`]: success, progress and efficiency scores
//! - [`bridge`]: line protocol for external agents
//! - [`bench`]: instance generation and benchmark runs
//! - [`gantt`]: text and SVG charts

pub mod bench;
pub mod bridge;
pub mod dsl;
mod error;
pub mod fixtures;
pub mod gantt;
pub mod interchange;
pub mod metrics;
pub mod model;
pub mod par;
pub mod sched;
pub mod sim;

pub use error::Error;
pub use model::{
    combine, prerequisites, validate_recipe, Action, ActionRef, ConcurrencyClass, Duration,
    Instance, Recipe, ResourceRequirement, TimeConstraint, Timestamp,
};
pub use par::Execution;
