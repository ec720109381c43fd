use std::collections::HashMap;
use std::fmt;

use ctrlsel_core::controllers::{
    lqr_track, mpc_track, pid_track, ControlError, LqrHorizon, LqrWeights, MpcConfig, PidGains,
};
use ctrlsel_core::dynamics::position;
use ctrlsel_core::environment::Disc;
use ctrlsel_core::planners::{
    astar, cem_plan, grad_plan, path_to_reference, rrt, AstarParams, CemParams, CemPlanWeights,
    Connectivity, GradParams, GradTarget, GradWeights, Path, PlannerError, RrtParams, RrtVariant,
};
use ctrlsel_core::stl::{plan_stl, PlanOptions, StlError};
use ctrlsel_core::{Control, Deadline, ScenarioSpec, Trajectory};
use serde_json::Value;

use super::{Binding, PipelineConfig, Stage};
use crate::catalog::{ApiCatalog, ApiEntry, ApiId};

#[derive(Clone, Debug, PartialEq)]
pub enum ExecError {
    /// The wall-clock budget ran out; `stage` names the stage running or
    /// about to run.
    Timeout { stage: Option<String> },
    /// An algorithm failed.
    Stage { stage: String, message: String },
}

impl fmt::Display for ExecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecError::Timeout { stage: Some(s) } => write!(f, "time limit exceeded during {s}"),
            ExecError::Timeout { stage: None } => f.write_str("time limit exceeded"),
            ExecError::Stage { stage, message } => write!(f, "{stage} failed: {message}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExecOutput {
    pub trajectory: Trajectory,
    pub controls: Vec<Control>,
    /// Geometric paths produced on the way, in stage order.
    pub paths: Vec<(String, Path)>,
}

enum Produced {
    Path(Path),
    Traj(Trajectory, Vec<Control>),
}

struct Params<'a> {
    stage: &'a Stage,
    entry: &'a ApiEntry,
}

impl Params<'_> {
    fn value(&self, name: &str) -> &Value {
        self.stage
            .params
            .get(name)
            .unwrap_or_else(|| &self.entry.param(name).expect("catalog parameter").default)
    }

    fn f(&self, name: &str) -> f64 {
        self.value(name).as_f64().unwrap_or(f64::NAN)
    }

    fn u(&self, name: &str) -> usize {
        self.value(name)
            .as_f64()
            .map(|v| v.max(0.0) as usize)
            .unwrap_or(0)
    }

    fn s(&self, name: &str) -> &str {
        self.value(name).as_str().unwrap_or_default()
    }
}

struct Run<'a> {
    spec: &'a ScenarioSpec,
    values: HashMap<String, Produced>,
    label: String,
    deadline: Deadline,
}

impl Run<'_> {
    fn fail(&self, message: impl fmt::Display) -> ExecError {
        ExecError::Stage {
            stage: self.label.clone(),
            message: message.to_string(),
        }
    }

    fn timeout(&self) -> ExecError {
        ExecError::Timeout {
            stage: Some(self.label.clone()),
        }
    }

    fn planner(&self, e: PlannerError) -> ExecError {
        match e {
            PlannerError::Timeout => self.timeout(),
            e => self.fail(e),
        }
    }

    fn planner_in(&self, e: PlannerError, context: &str) -> ExecError {
        match e {
            PlannerError::Timeout => self.timeout(),
            e => self.fail(format!("{context}: {e}")),
        }
    }

    fn control(&self, e: ControlError) -> ExecError {
        match e {
            ControlError::Timeout => self.timeout(),
            e => self.fail(e),
        }
    }

    fn goal(&self) -> Result<Disc, ExecError> {
        self.spec
            .goal
            .ok_or_else(|| self.fail("scenario has no goal"))
    }

    fn path(&self, stage: &Stage, input: &str) -> Result<Option<Path>, ExecError> {
        match stage.inputs.get(input) {
            None => Ok(None),
            Some(Binding::Stage(name)) => match self.values.get(name) {
                Some(Produced::Path(p)) => Ok(Some(p.clone())),
                _ => Err(self.fail(format!("`{name}` is not an available path"))),
            },
            Some(b) => Err(self.fail(format!("`{b}` is not a path"))),
        }
    }

    fn reference(&self, stage: &Stage, input: &str) -> Result<Option<Trajectory>, ExecError> {
        match stage.inputs.get(input) {
            None => Ok(None),
            Some(Binding::Scenario(_)) => self
                .spec
                .reference
                .clone()
                .map(Some)
                .ok_or_else(|| self.fail("scenario has no reference")),
            Some(Binding::AsReference(name)) => match self.values.get(name) {
                Some(Produced::Path(p)) => {
                    path_to_reference(p, &self.spec.model, self.spec.dt, self.spec.horizon)
                        .map(Some)
                        .map_err(|e| self.fail(format!("as_reference({name}): {e}")))
                }
                _ => Err(self.fail(format!("`{name}` is not an available path"))),
            },
            Some(Binding::Stage(name)) => Err(self.fail(format!("`{name}` is not a reference"))),
        }
    }
}

fn run_rrt(run: &Run<'_>, stage: &Stage, p: &Params<'_>) -> Result<Path, ExecError> {
    let spec = run.spec;
    let goal = run.goal()?;
    let params = RrtParams {
        step_size: p.f("step_size"),
        goal_bias: p.f("goal_bias"),
        max_iters: p.u("max_iters"),
        variant: if p.s("variant") == "rrt_star" {
            RrtVariant::RrtStar
        } else {
            RrtVariant::Rrt
        },
        rewire_radius: p.f("rewire_radius"),
        rng_seed: p.u("seed") as u64,
        clearance: p.f("clearance"),
        deadline: run.deadline,
    };
    let start = spec.start_position();
    let route = run.path(stage, "route")?;
    let Some(route) = route else {
        return rrt(start, &goal, &spec.obstacles, &spec.workspace, &params)
            .map_err(|e| run.planner(e));
    };
    let stride = p.u("route_stride").max(1);
    let radius = p.f("waypoint_radius");
    let mut out = Path::new(vec![start]);
    let mut leg = 0u64;
    let mut idx = stride;
    let last = route.waypoints.len().saturating_sub(1);
    while idx < last {
        let target = Disc::new(route.waypoints[idx], radius);
        if !target.contains(out.end()) && !goal.contains(out.end()) {
            let leg_params = RrtParams {
                rng_seed: params.rng_seed.wrapping_add(leg),
                ..params.clone()
            };
            let piece = rrt(
                out.end(),
                &target,
                &spec.obstacles,
                &spec.workspace,
                &leg_params,
            )
            .map_err(|e| {
                run.planner_in(e, &format!("leg {} towards route waypoint {idx}", leg + 1))
            })?;
            out.extend(&piece);
        }
        leg += 1;
        idx += stride;
    }
    if !goal.contains(out.end()) || out.waypoints.len() == 1 {
        let leg_params = RrtParams {
            rng_seed: params.rng_seed.wrapping_add(leg),
            ..params
        };
        let piece = rrt(
            out.end(),
            &goal,
            &spec.obstacles,
            &spec.workspace,
            &leg_params,
        )
        .map_err(|e| run.planner_in(e, "final leg to the goal"))?;
        out.extend(&piece);
    }
    Ok(out)
}

fn run_stage(run: &Run<'_>, stage: &Stage, entry: &ApiEntry) -> Result<Produced, ExecError> {
    let spec = run.spec;
    let p = Params { stage, entry };
    let model = &spec.model;
    let (n, m) = (model.state_dim(), model.control_dim());
    match stage.api {
        ApiId::Astar => {
            let params = AstarParams {
                grid_resolution: p.f("grid_resolution"),
                connectivity: if p.s("connectivity") == "four" {
                    Connectivity::Four
                } else {
                    Connectivity::Eight
                },
            };
            let goal = run.goal()?;
            astar(
                spec.start_position(),
                goal.center,
                &spec.obstacles,
                &spec.workspace,
                &params,
            )
            .map(Produced::Path)
            .map_err(|e| run.planner(e))
        }
        ApiId::Rrt => run_rrt(run, stage, &p).map(Produced::Path),
        ApiId::Cem => {
            let params = CemParams {
                population: p.u("population"),
                elite_fraction: p.f("elite_fraction"),
                iterations: p.u("iterations"),
                init_std: p.f("init_std"),
                rng_seed: p.u("seed") as u64,
                deadline: run.deadline,
            };
            let weights = CemPlanWeights {
                goal: p.f("goal_weight"),
                collision: p.f("collision_weight"),
                effort: p.f("effort_weight"),
                ..CemPlanWeights::default()
            };
            let obstacles = if stage.inputs.contains_key("obstacles") {
                &spec.obstacles[..]
            } else {
                &[]
            };
            let (u, t) = cem_plan(
                model,
                &spec.x0,
                &run.goal()?,
                obstacles,
                spec.horizon,
                spec.dt,
                spec.integrator,
                &params,
                &weights,
            )
            .map_err(|e| run.planner(e))?;
            Ok(Produced::Traj(t, u))
        }
        ApiId::Grad => {
            let target = match run.reference(stage, "reference")? {
                Some(r) => GradTarget::Reference(r),
                None => GradTarget::Goal(run.goal()?),
            };
            let params = GradParams {
                step_count: None,
                learning_rate: p.f("learning_rate"),
                iterations: p.u("iterations"),
                deadline: run.deadline,
            };
            let weights = GradWeights {
                obstacle: p.f("obstacle_weight"),
                effort: p.f("effort_weight"),
                safety_margin: p.f("safety_margin"),
                ..GradWeights::default()
            };
            let obstacles = if stage.inputs.contains_key("obstacles") {
                &spec.obstacles[..]
            } else {
                &[]
            };
            let (u, t) = grad_plan(
                model,
                &spec.x0,
                &target,
                obstacles,
                spec.horizon,
                spec.dt,
                spec.integrator,
                &params,
                &weights,
            )
            .map_err(|e| run.planner(e))?;
            Ok(Produced::Traj(t, u))
        }
        ApiId::Lqr | ApiId::Mpc | ApiId::Pid => {
            let reference = run
                .reference(stage, "reference")?
                .ok_or_else(|| run.fail("no reference bound"))?;
            let (u, t) = match stage.api {
                ApiId::Lqr => {
                    let horizon = if p.s("horizon") == "infinite" {
                        LqrHorizon::Infinite
                    } else {
                        LqrHorizon::Finite(reference.len().saturating_sub(1))
                    };
                    let mut w = LqrWeights::diagonal(n, m, p.f("q"), p.f("r"), horizon);
                    w.qf = Some(LqrWeights::diagonal(n, m, p.f("qf"), 1.0, horizon).q);
                    lqr_track(model, &spec.x0, &reference, &w, spec.dt, spec.integrator)
                }
                ApiId::Mpc => {
                    let config = MpcConfig {
                        horizon: p.u("horizon"),
                        q: p.f("q"),
                        r: p.f("r"),
                        qf: p.f("qf"),
                        max_sqp_iters: p.u("max_sqp_iters"),
                        deadline: run.deadline,
                        ..MpcConfig::default()
                    };
                    mpc_track(
                        model,
                        &spec.x0,
                        &reference,
                        &config,
                        spec.dt,
                        spec.integrator,
                    )
                }
                _ => {
                    let gains = PidGains {
                        kp: p.f("kp"),
                        ki: p.f("ki"),
                        kd: p.f("kd"),
                        integral_limit: p.f("integral_limit"),
                        heading_kp: p.f("heading_kp"),
                    };
                    pid_track(
                        model,
                        &spec.x0,
                        &reference,
                        &gains,
                        spec.dt,
                        spec.integrator,
                    )
                }
            }
            .map_err(|e| run.control(e))?;
            Ok(Produced::Traj(t, u))
        }
        ApiId::Milp => {
            let formula = spec
                .stl_formula
                .as_ref()
                .ok_or_else(|| run.fail("scenario has no STL formula"))?;
            let mut opts = PlanOptions::new(spec.workspace);
            opts.encode.margin = p.f("margin");
            opts.node_limit = p.u("node_limit");
            opts.deadline = run.deadline;
            match plan_stl(formula, model, &spec.x0, spec.horizon, spec.dt, &opts) {
                Ok(plan) => Ok(Produced::Traj(plan.trajectory, plan.controls)),
                Err(StlError::Timeout) => Err(run.timeout()),
                Err(e) => Err(run.fail(e)),
            }
        }
    }
}

/// Runs a validated pipeline stage by stage within `timeout_s` seconds of
/// wall-clock time.
pub fn execute_pipeline(
    config: &PipelineConfig,
    spec: &ScenarioSpec,
    catalog: &ApiCatalog,
    timeout_s: f64,
) -> Result<ExecOutput, ExecError> {
    let mut run = Run {
        spec,
        values: HashMap::new(),
        label: String::new(),
        deadline: Deadline::after_secs(timeout_s),
    };
    let mut paths = Vec::new();
    for (i, stage) in config.stages.iter().enumerate() {
        run.label = format!("stage {} ({})", i + 1, stage.api);
        if run.deadline.expired() {
            return Err(run.timeout());
        }
        let value = run_stage(&run, stage, catalog.get(stage.api))?;
        if run.deadline.expired() {
            return Err(run.timeout());
        }
        if let Produced::Path(p) = &value {
            paths.push((stage.output.clone(), p.clone()));
        }
        run.values.insert(stage.output.clone(), value);
    }
    run.label = format!("final output `{}`", config.final_output);
    match run.values.remove(&config.final_output) {
        Some(Produced::Traj(trajectory, controls)) => {
            if trajectory
                .states
                .iter()
                .any(|x| position(x).iter().any(|v| !v.is_finite()))
            {
                return Err(run.fail("trajectory contains non-finite states"));
            }
            Ok(ExecOutput {
                trajectory,
                controls,
                paths,
            })
        }
        _ => Err(run.fail("final output is not a trajectory")),
    }
}
