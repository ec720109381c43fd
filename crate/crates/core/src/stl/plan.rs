use super::encode::{encode_stl_milp, EncodeOptions};
use super::{robustness, StlError, StlFormula};
use crate::budget::Deadline;
use crate::dynamics::{Control, DynamicsModel, Integrator, State, Trajectory};
use crate::environment::Rect;
use crate::milp::{branch_and_bound_with, BnbOptions, MilpError, MilpStatus};

/// LP relaxations per plan; the dive usually finds a plan within a few
/// dozen, the rest improve its effort.
pub const PLAN_NODE_LIMIT: usize = 300;

#[derive(Clone, Debug)]
pub struct PlanOptions {
    pub encode: EncodeOptions,
    pub node_limit: usize,
    pub deadline: Deadline,
    /// Accept the best feasible plan found when the node limit is reached.
    pub accept_incumbent: bool,
    pub dive: bool,
}

impl PlanOptions {
    pub fn new(workspace: Rect) -> Self {
        let mut encode = EncodeOptions::new(workspace);
        encode.margin = 0.01;
        Self {
            encode,
            node_limit: PLAN_NODE_LIMIT,
            deadline: Deadline::unbounded(),
            accept_incumbent: true,
            dive: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StlPlan {
    /// Euler rollout of `controls` from `x0`.
    pub trajectory: Trajectory,
    pub controls: Vec<Control>,
    pub robustness: f64,
    /// Total L1 control effort.
    pub effort: f64,
    /// False when the search stopped at the node limit with an incumbent.
    pub proven_optimal: bool,
    pub nodes: usize,
}

/// Plans a trajectory satisfying `formula` at step 0 by solving its MILP
/// encoding, then re-simulates the decoded controls and checks robustness.
pub fn plan_stl(
    formula: &StlFormula,
    model: &DynamicsModel,
    x0: &State,
    horizon: usize,
    dt: f64,
    opts: &PlanOptions,
) -> Result<StlPlan, StlError> {
    let enc = encode_stl_milp(formula, model, x0, horizon, dt, &opts.encode)?;
    let bnb = BnbOptions {
        node_limit: opts.node_limit,
        deadline: opts.deadline.clone(),
        dive: opts.dive,
        ..BnbOptions::default()
    };
    let sol = match branch_and_bound_with(&enc.problem, &bnb) {
        Ok(s) => s,
        Err(MilpError::DeadlineExceeded { .. }) => return Err(StlError::Timeout),
        Err(e) => return Err(e.into()),
    };
    let proven_optimal = match sol.status {
        MilpStatus::Optimal => true,
        MilpStatus::Infeasible => return Err(StlError::Infeasible),
        MilpStatus::Unbounded => {
            return Err(StlError::Malformed(
                "bounded encoding reported unbounded".into(),
            ))
        }
        MilpStatus::NodeLimit if sol.has_solution() && opts.accept_incumbent => false,
        MilpStatus::NodeLimit => return Err(StlError::NodeLimit),
    };
    let controls = enc.decode_controls(&sol.values);
    let trajectory = model.rollout(x0, &controls, dt, Integrator::Euler)?;
    let rho = robustness(formula, &trajectory, 0)?;
    if rho < -1e-6 {
        return Err(StlError::Violated(rho));
    }
    Ok(StlPlan {
        trajectory,
        controls,
        robustness: rho,
        effort: sol.objective,
        proven_optimal,
        nodes: sol.nodes,
    })
}
