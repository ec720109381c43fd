//! Signal temporal logic over discrete-time trajectories: formulas,
//! quantitative robustness, a canonical text syntax, and planning through a
//! big-M MILP encoding.
//!
//! Temporal intervals are integer step offsets; the sampling period only
//! enters through the dynamics.

mod encode;
mod formula;
mod plan;
mod robustness;
mod syntax;

use thiserror::Error;

pub use encode::{encode_stl_milp, EncodeOptions, MilpEncoding, TermRef, DEFAULT_STRICT_GAP};
pub use formula::StlFormula;
pub use plan::{plan_stl, PlanOptions, StlPlan, PLAN_NODE_LIMIT};
pub use robustness::{robustness, robustness_signal};
pub use syntax::{parse_formula, SyntaxError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StlError {
    #[error("formula needs {needed} samples from step {start} but the signal has {available}")]
    WindowOverflow {
        start: usize,
        needed: usize,
        available: usize,
    },
    #[error("malformed formula: {0}")]
    Malformed(String),
    #[error("MILP planning needs linear dynamics, got {0}")]
    NonlinearModel(crate::ModelKind),
    #[error("horizon {horizon} exceeds the encoder cap of {cap}")]
    HorizonTooLarge { horizon: usize, cap: usize },
    #[error("formula is infeasible for the given dynamics and bounds")]
    Infeasible,
    #[error("MILP search stopped at the node limit without a feasible plan")]
    NodeLimit,
    #[error("plan violates the formula (robustness {0})")]
    Violated(f64),
    #[error("MILP solver failed: {0}")]
    Solver(#[from] crate::milp::MilpError),
    #[error("dynamics: {0}")]
    Dynamics(#[from] crate::dynamics::DynamicsError),
    #[error("planning budget exhausted")]
    Timeout,
}
