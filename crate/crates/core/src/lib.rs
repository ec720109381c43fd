//! Deterministic planning and control library.
//!
//! Everything an orchestration layer needs to execute a task: continuous
//! dynamics and their discretization ([`dynamics`]), seeded scenario worlds
//! and outcome checks ([`environment`]), geometric and optimization-based
//! planners ([`planners`]), feedback controllers ([`controllers`]), signal
//! temporal logic monitoring and MILP planning ([`stl`]), and the small exact
//! MILP solver backing it ([`milp`]).

pub mod budget;
pub mod controllers;
pub mod dynamics;
pub mod environment;
pub mod milp;
pub mod planners;
pub mod stl;

pub use budget::Deadline;
pub use dynamics::{Control, DynamicsModel, Integrator, ModelKind, State, Trajectory};
pub use environment::{Obstacle, ScenarioKind, ScenarioSpec, TaskOutcome, Workspace};
