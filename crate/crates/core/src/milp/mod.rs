//! Small dense MILP solver: two-phase bounded primal simplex for LP
//! relaxations and best-first branch-and-bound on top of it.

mod bnb;
mod lp_format;
mod simplex;

use thiserror::Error;

pub use bnb::{branch_and_bound, branch_and_bound_with, BnbOptions, DEFAULT_NODE_LIMIT};
pub use lp_format::to_lp_format;
pub use simplex::simplex_solve;

/// Feasibility tolerance used to verify returned optima.
pub const FEAS_TOL: f64 = 1e-7;
/// Integrality tolerance.
pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("numerical failure in simplex: {0}")]
    Numeric(String),
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("integer variable {0} is unbounded")]
    UnboundedInteger(usize),
    #[error("deadline exceeded after {nodes} nodes")]
    DeadlineExceeded { nodes: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    /// Sparse coefficients `(variable, value)`.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|(j, a)| a * x[*j]).sum()
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.relation {
            Relation::Le => (act - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - act).max(0.0),
            Relation::Eq => (act - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// Per-variable `[lo, hi]`; infinities allowed.
    pub bounds: Vec<(f64, f64)>,
    pub names: Vec<String>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            objective: Vec::new(),
            constraints: Vec::new(),
            bounds: Vec::new(),
            names: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lo: f64, hi: f64, cost: f64) -> usize {
        self.objective.push(cost);
        self.bounds.push((lo, hi));
        self.names.push(name.into());
        self.objective.len() - 1
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(0.0, f64::max);
        let bounds = self
            .bounds
            .iter()
            .zip(x)
            .map(|((lo, hi), v)| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(MilpError::Malformed(
                "bounds length differs from objective".into(),
            ));
        }
        for (j, (lo, hi)) in self.bounds.iter().enumerate() {
            if lo > hi || lo.is_nan() || hi.is_nan() {
                return Err(MilpError::Malformed(format!("variable {j} has lo > hi")));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(MilpError::Malformed(format!(
                    "row {i} has a non-finite rhs"
                )));
            }
            if let Some((j, _)) = c.coeffs.iter().find(|(j, a)| *j >= n || !a.is_finite()) {
                return Err(MilpError::Malformed(format!(
                    "row {i} references bad column {j}"
                )));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(MilpError::Malformed(
                "non-finite objective coefficient".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilpProblem {
    pub lp: LinearProgram,
    pub integers: Vec<usize>,
}

impl MilpProblem {
    pub fn new(lp: LinearProgram, integers: Vec<usize>) -> Self {
        Self { lp, integers }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Empty unless a feasible point is known.
    pub values: Vec<f64>,
    pub objective: f64,
    /// Row duals (LP solves only): `c − Aᵀy` are the reduced costs in the
    /// problem's own sense.
    pub duals: Vec<f64>,
    pub nodes: usize,
    pub simplex_iterations: usize,
}

impl MilpSolution {
    pub(crate) fn infeasible() -> Self {
        Self {
            status: MilpStatus::Infeasible,
            values: Vec::new(),
            objective: f64::NAN,
            duals: Vec::new(),
            nodes: 0,
            simplex_iterations: 0,
        }
    }

    pub fn has_solution(&self) -> bool {
        !self.values.is_empty()
    }
}
