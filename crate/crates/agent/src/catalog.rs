//! The eight algorithm APIs offered to the language model: descriptions,
//! typed signatures, parameter schemas and retrieval documentation.

use std::fmt::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApiId {
    Astar,
    Cem,
    Grad,
    Lqr,
    Milp,
    Mpc,
    Pid,
    Rrt,
}

impl ApiId {
    pub const ALL: [ApiId; 8] = [
        ApiId::Astar,
        ApiId::Cem,
        ApiId::Grad,
        ApiId::Lqr,
        ApiId::Milp,
        ApiId::Mpc,
        ApiId::Pid,
        ApiId::Rrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ApiId::Astar => "astar",
            ApiId::Cem => "cem",
            ApiId::Grad => "grad",
            ApiId::Lqr => "lqr",
            ApiId::Milp => "milp",
            ApiId::Mpc => "mpc",
            ApiId::Pid => "pid",
            ApiId::Rrt => "rrt",
        }
    }
}

impl fmt::Display for ApiId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ApiId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ApiId::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown API id `{s}`"))
    }
}

/// Semantic type of a value flowing through a pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemType {
    State,
    Model,
    Goal,
    Obstacles,
    Reference,
    StlFormula,
    Path,
    Trajectory,
}

impl SemType {
    pub fn name(self) -> &'static str {
        match self {
            SemType::State => "State",
            SemType::Model => "Model",
            SemType::Goal => "Goal",
            SemType::Obstacles => "Obstacles",
            SemType::Reference => "Reference",
            SemType::StlFormula => "StlFormula",
            SemType::Path => "Path",
            SemType::Trajectory => "Trajectory",
        }
    }
}

impl fmt::Display for SemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InputSpec {
    pub name: &'static str,
    pub ty: SemType,
    pub required: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParamKind {
    Int,
    Float,
    Choice(&'static [&'static str]),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    pub default: Value,
    /// Inclusive numeric range; unused for choices.
    pub min: f64,
    pub max: f64,
    pub doc: &'static str,
}

impl ParamSpec {
    fn float(name: &'static str, default: f64, min: f64, max: f64, doc: &'static str) -> Self {
        Self {
            name,
            kind: ParamKind::Float,
            default: json!(default),
            min,
            max,
            doc,
        }
    }

    fn int(name: &'static str, default: i64, min: i64, max: i64, doc: &'static str) -> Self {
        Self {
            name,
            kind: ParamKind::Int,
            default: json!(default),
            min: min as f64,
            max: max as f64,
            doc,
        }
    }

    fn choice(
        name: &'static str,
        options: &'static [&'static str],
        default: &str,
        doc: &'static str,
    ) -> Self {
        Self {
            name,
            kind: ParamKind::Choice(options),
            default: json!(default),
            min: 0.0,
            max: 0.0,
            doc,
        }
    }

    /// Checks a supplied value against the type and range.
    pub fn check(&self, v: &Value) -> Result<(), String> {
        match &self.kind {
            ParamKind::Int => {
                let Some(x) = v
                    .as_i64()
                    .or_else(|| v.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64))
                else {
                    return Err(format!(
                        "parameter `{}` must be an integer, got {v}",
                        self.name
                    ));
                };
                if (x as f64) < self.min || (x as f64) > self.max {
                    return Err(format!(
                        "parameter `{}` = {x} is outside the range [{}, {}]",
                        self.name, self.min, self.max
                    ));
                }
                Ok(())
            }
            ParamKind::Float => {
                let Some(x) = v.as_f64() else {
                    return Err(format!(
                        "parameter `{}` must be a number, got {v}",
                        self.name
                    ));
                };
                if !(x >= self.min && x <= self.max) {
                    return Err(format!(
                        "parameter `{}` = {x} is outside the range [{}, {}]",
                        self.name, self.min, self.max
                    ));
                }
                Ok(())
            }
            ParamKind::Choice(options) => match v.as_str() {
                Some(s) if options.contains(&s) => Ok(()),
                _ => Err(format!(
                    "parameter `{}` must be one of {}, got {v}",
                    self.name,
                    options
                        .iter()
                        .map(|o| format!("\"{o}\""))
                        .collect::<Vec<_>>()
                        .join(", ")
                )),
            },
        }
    }

    fn describe(&self) -> String {
        match &self.kind {
            ParamKind::Int => format!(
                "- `{}` (integer, default {}, range [{}, {}]): {}",
                self.name, self.default, self.min, self.max, self.doc
            ),
            ParamKind::Float => format!(
                "- `{}` (number, default {}, range [{}, {}]): {}",
                self.name, self.default, self.min, self.max, self.doc
            ),
            ParamKind::Choice(o) => format!(
                "- `{}` (one of {}, default {}): {}",
                self.name,
                o.iter()
                    .map(|x| format!("\"{x}\""))
                    .collect::<Vec<_>>()
                    .join(", "),
                self.default,
                self.doc
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApiEntry {
    pub id: ApiId,
    pub description: &'static str,
    pub inputs: Vec<InputSpec>,
    pub output: SemType,
    pub params: Vec<ParamSpec>,
    /// Only linear (integrator) dynamics are supported.
    pub requires_linear: bool,
    /// Model-compatibility rules in prose, enforced by validation.
    pub rules: &'static [&'static str],
    /// Worked wiring example in the pipeline grammar.
    pub example: &'static str,
}

impl ApiEntry {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn input(&self, name: &str) -> Option<&InputSpec> {
        self.inputs.iter().find(|i| i.name == name)
    }

    pub fn signature(&self) -> String {
        let ins: Vec<String> = self
            .inputs
            .iter()
            .map(|i| format!("{}{}: {}", i.name, if i.required { "" } else { "?" }, i.ty))
            .collect();
        format!("{}({}) -> {}", self.id, ins.join(", "), self.output)
    }

    /// Full documentation returned on retrieval.
    pub fn docs(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "### API `{}`", self.id);
        let _ = writeln!(out, "{}", self.description);
        let _ = writeln!(
            out,
            "Signature: `{}` (inputs marked ? are optional)",
            self.signature()
        );
        let _ = writeln!(out, "Parameters:");
        for p in &self.params {
            let _ = writeln!(out, "{}", p.describe());
        }
        if !self.rules.is_empty() {
            let _ = writeln!(out, "Rules:");
            for r in self.rules {
                let _ = writeln!(out, "- {r}");
            }
        }
        let _ = writeln!(out, "Example stage:");
        let _ = writeln!(out, "{}", self.example);
        out
    }
}

fn input(name: &'static str, ty: SemType, required: bool) -> InputSpec {
    InputSpec { name, ty, required }
}

fn seed_param() -> ParamSpec {
    ParamSpec::int("seed", 0, 0, i32::MAX as i64, "random seed")
}

fn tracking_inputs() -> Vec<InputSpec> {
    vec![
        input("x0", SemType::State, true),
        input("model", SemType::Model, true),
        input("reference", SemType::Reference, true),
    ]
}

fn entries() -> Vec<ApiEntry> {
    vec![
        ApiEntry {
            id: ApiId::Astar,
            description: "Grid A* search: discretizes the workspace into an occupancy grid, blocks cells touching obstacles and returns the shortest collision-free cell path from the start position to the goal center. Fast and complete on the grid; good for coarse global routes through mazes and clutter.",
            inputs: vec![
                input("start", SemType::State, true),
                input("goal", SemType::Goal, true),
                input("obstacles", SemType::Obstacles, true),
            ],
            output: SemType::Path,
            params: vec![
                ParamSpec::float("grid_resolution", 0.25, 0.05, 2.0, "cell side in m"),
                ParamSpec::choice("connectivity", &["four", "eight"], "eight", "grid neighbourhood; diagonal moves never cut corners"),
            ],
            requires_linear: false,
            rules: &["needs a goal region and the obstacle list", "needs a planar position state (not the pendulum)"],
            example: r#"{"api": "astar", "params": {"grid_resolution": 0.25}, "inputs": {"start": "scenario.x0", "goal": "scenario.goal", "obstacles": "scenario.obstacles"}, "output": "route"}"#,
        },
        ApiEntry {
            id: ApiId::Cem,
            description: "Cross-entropy method: samples control sequences from a Gaussian, keeps the elite fraction with the lowest cost (goal distance, obstacle penetration, effort) and refits the distribution. Derivative-free; suits short horizons and nonlinear dynamics.",
            inputs: vec![
                input("x0", SemType::State, true),
                input("model", SemType::Model, true),
                input("goal", SemType::Goal, true),
                input("obstacles", SemType::Obstacles, false),
            ],
            output: SemType::Trajectory,
            params: vec![
                ParamSpec::int("population", 64, 4, 4096, "samples per iteration"),
                ParamSpec::float("elite_fraction", 0.125, 0.01, 0.5, "share of samples refitted"),
                ParamSpec::int("iterations", 30, 1, 1000, "refit iterations"),
                ParamSpec::float("init_std", 1.0, 1e-3, 100.0, "initial sampling standard deviation"),
                ParamSpec::float("goal_weight", 10.0, 0.0, 1e6, "weight of the squared final goal distance"),
                ParamSpec::float("collision_weight", 100.0, 0.0, 1e6, "weight of squared obstacle penetration"),
                ParamSpec::float("effort_weight", 1e-3, 0.0, 1e3, "weight of squared control effort"),
                seed_param(),
            ],
            requires_linear: false,
            rules: &["needs a goal region"],
            example: r#"{"api": "cem", "params": {"population": 128}, "inputs": {"x0": "scenario.x0", "model": "scenario.model", "goal": "scenario.goal", "obstacles": "scenario.obstacles"}, "output": "traj"}"#,
        },
        ApiEntry {
            id: ApiId::Grad,
            description: "Gradient-based trajectory optimization: differentiates the rollout cost (goal or reference error plus a smooth obstacle barrier and effort) with respect to the control sequence and runs gradient descent. Works with any differentiable dynamics; needs a sensible learning rate.",
            inputs: vec![
                input("x0", SemType::State, true),
                input("model", SemType::Model, true),
                input("goal", SemType::Goal, false),
                input("reference", SemType::Reference, false),
                input("obstacles", SemType::Obstacles, false),
            ],
            output: SemType::Trajectory,
            params: vec![
                ParamSpec::float("learning_rate", 0.5, 1e-6, 100.0, "gradient step size"),
                ParamSpec::int("iterations", 300, 1, 100000, "descent iterations"),
                ParamSpec::float("obstacle_weight", 10.0, 0.0, 1e6, "barrier weight"),
                ParamSpec::float("effort_weight", 1e-3, 0.0, 1e3, "weight of squared control effort"),
                ParamSpec::float("safety_margin", 0.2, 0.0, 5.0, "distance in m at which the barrier switches on"),
            ],
            requires_linear: false,
            rules: &["needs exactly one of goal or reference"],
            example: r#"{"api": "grad", "params": {"learning_rate": 0.2}, "inputs": {"x0": "scenario.x0", "model": "scenario.model", "goal": "scenario.goal", "obstacles": "scenario.obstacles"}, "output": "traj"}"#,
        },
        ApiEntry {
            id: ApiId::Lqr,
            description: "Linear quadratic regulator tracking: linearizes the dynamics along the reference, solves the Riccati recursion (finite or infinite horizon) and applies saturated feedback around the reference feedforward. Cheap and smooth for linearizable systems.",
            inputs: tracking_inputs(),
            output: SemType::Trajectory,
            params: vec![
                ParamSpec::float("q", 1.0, 0.0, 1e6, "state weight (identity scale)"),
                ParamSpec::float("r", 0.1, 1e-6, 1e6, "control weight (identity scale)"),
                ParamSpec::float("qf", 1.0, 0.0, 1e6, "terminal state weight (finite horizon)"),
                ParamSpec::choice("horizon", &["finite", "infinite"], "finite", "Riccati horizon"),
            ],
            requires_linear: false,
            rules: &["needs a reference (a scenario reference or as_reference(<path>))"],
            example: r#"{"api": "lqr", "params": {"q": 2.0}, "inputs": {"x0": "scenario.x0", "model": "scenario.model", "reference": "scenario.reference"}, "output": "traj"}"#,
        },
        ApiEntry {
            id: ApiId::Milp,
            description: "Mixed-integer STL planning: encodes the signal temporal logic formula over linear dynamics as a big-M mixed-integer linear program, solves it by branch and bound and returns a plan that satisfies the formula with margin.",
            inputs: vec![
                input("x0", SemType::State, true),
                input("model", SemType::Model, true),
                input("stl_formula", SemType::StlFormula, true),
            ],
            output: SemType::Trajectory,
            params: vec![
                ParamSpec::float("margin", 0.01, 0.0, 1.0, "required robustness margin"),
                ParamSpec::int("node_limit", 300, 1, 200000, "branch-and-bound LP budget"),
            ],
            requires_linear: true,
            rules: &["milp requires linear dynamics (single or double integrator)", "needs the STL formula"],
            example: r#"{"api": "milp", "params": {}, "inputs": {"x0": "scenario.x0", "model": "scenario.model", "stl_formula": "scenario.stl_formula"}, "output": "traj"}"#,
        },
        ApiEntry {
            id: ApiId::Mpc,
            description: "Model predictive control: at every step solves a finite-horizon tracking problem with control bounds by sequential quadratic programming, applies the first control and re-plans. Handles nonlinear dynamics and constraints at higher cost.",
            inputs: tracking_inputs(),
            output: SemType::Trajectory,
            params: vec![
                ParamSpec::int("horizon", 15, 1, 100, "prediction horizon in steps"),
                ParamSpec::float("q", 1.0, 0.0, 1e6, "state weight"),
                ParamSpec::float("r", 0.1, 1e-6, 1e6, "control weight"),
                ParamSpec::float("qf", 10.0, 0.0, 1e6, "terminal state weight"),
                ParamSpec::int("max_sqp_iters", 20, 1, 500, "SQP iterations per solve"),
            ],
            requires_linear: false,
            rules: &["needs a reference (a scenario reference or as_reference(<path>))"],
            example: r#"{"api": "mpc", "params": {"horizon": 15}, "inputs": {"x0": "scenario.x0", "model": "scenario.model", "reference": "scenario.reference"}, "output": "traj"}"#,
        },
        ApiEntry {
            id: ApiId::Pid,
            description: "PID tracking: proportional-integral-derivative feedback on the position error to the next reference sample, with anti-windup and a heading loop for the unicycle. Minimal computation; needs tuned gains.",
            inputs: tracking_inputs(),
            output: SemType::Trajectory,
            params: vec![
                ParamSpec::float("kp", 4.0, 0.0, 1e4, "proportional gain"),
                ParamSpec::float("ki", 0.0, 0.0, 1e4, "integral gain"),
                ParamSpec::float("kd", 0.0, 0.0, 1e4, "derivative gain"),
                ParamSpec::float("integral_limit", 1.0, 1e-6, 1e6, "anti-windup clamp of the integral"),
                ParamSpec::float("heading_kp", 4.0, 0.0, 1e4, "unicycle heading gain"),
            ],
            requires_linear: false,
            rules: &["needs a reference (a scenario reference or as_reference(<path>))"],
            example: r#"{"api": "pid", "params": {"kp": 10.0}, "inputs": {"x0": "scenario.x0", "model": "scenario.model", "reference": "as_reference(path)"}, "output": "traj"}"#,
        },
        ApiEntry {
            id: ApiId::Rrt,
            description: "Rapidly-exploring random tree (RRT or the rewiring RRT* variant): grows a collision-free tree from the start by random sampling until it reaches the goal region. With a route input it refines the route leg by leg between its waypoints.",
            inputs: vec![
                input("start", SemType::State, true),
                input("goal", SemType::Goal, true),
                input("obstacles", SemType::Obstacles, true),
                input("route", SemType::Path, false),
            ],
            output: SemType::Path,
            params: vec![
                ParamSpec::float("step_size", 0.4, 0.05, 5.0, "maximum edge length in m"),
                ParamSpec::float("goal_bias", 0.05, 0.0, 1.0, "probability of sampling the goal"),
                ParamSpec::int("max_iters", 5000, 1, 200000, "tree expansions (per leg with a route)"),
                ParamSpec::choice("variant", &["rrt", "rrt_star"], "rrt", "plain RRT or RRT*"),
                ParamSpec::float("rewire_radius", 1.0, 0.05, 10.0, "RRT* rewiring radius in m"),
                ParamSpec::float("clearance", 0.0, 0.0, 2.0, "extra obstacle inflation in m"),
                ParamSpec::int("route_stride", 4, 1, 1000, "route waypoints skipped between legs"),
                ParamSpec::float("waypoint_radius", 0.3, 0.05, 2.0, "radius of intermediate leg targets in m"),
                seed_param(),
            ],
            requires_linear: false,
            rules: &["needs a goal region and the obstacle list", "needs a planar position state (not the pendulum)"],
            example: r#"{"api": "rrt", "params": {"max_iters": 3000}, "inputs": {"start": "scenario.x0", "goal": "scenario.goal", "obstacles": "scenario.obstacles"}, "output": "path"}"#,
        },
    ]
}

/// The immutable set of APIs offered to the model.
#[derive(Clone, Debug, PartialEq)]
pub struct ApiCatalog {
    entries: Vec<ApiEntry>,
}

impl Default for ApiCatalog {
    fn default() -> Self {
        Self::standard()
    }
}

impl ApiCatalog {
    pub fn standard() -> Self {
        Self { entries: entries() }
    }

    pub fn entries(&self) -> &[ApiEntry] {
        &self.entries
    }

    pub fn get(&self, id: ApiId) -> &ApiEntry {
        self.entries
            .iter()
            .find(|e| e.id == id)
            .expect("catalog holds every API id")
    }

    pub fn lookup(&self, name: &str) -> Option<&ApiEntry> {
        name.parse::<ApiId>().ok().map(|id| self.get(id))
    }

    /// One line per API: id and description, without documentation.
    pub fn descriptions(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("- {}: {}", e.id, e.description))
            .collect::<Vec<_>>()
            .join("\n")
    }
}
