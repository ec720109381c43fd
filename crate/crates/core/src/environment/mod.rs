//! Scenario worlds: workspace geometry, seeded task generation, task text and
//! outcome checks.

mod config;
mod feasibility;
mod generate;
pub mod geometry;
mod render;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{position, Control, DynamicsModel, Integrator, State, Trajectory};
use crate::stl::{robustness, StlFormula};

pub use config::{ConfigError, SCHEMA_VERSION};
pub use feasibility::grid_path_exists;
pub use generate::generate_scenario;
pub use geometry::{
    clearance, collides_point, collides_segment, dist, point_segment_distance, Disc, Obstacle,
    Point, Rect, Workspace,
};
pub use render::{environment_summary, render_task_description};

/// Maximum RMS position error accepted for tracking tasks [m].
pub const TRACKING_TOLERANCE: f64 = 0.15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    TrackLinear,
    TrackDubins,
    SimplePlan,
    MazePlan,
    StlTask,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::TrackLinear,
        ScenarioKind::TrackDubins,
        ScenarioKind::SimplePlan,
        ScenarioKind::MazePlan,
        ScenarioKind::StlTask,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::TrackLinear => "track_linear",
            ScenarioKind::TrackDubins => "track_dubins",
            ScenarioKind::SimplePlan => "simple_plan",
            ScenarioKind::MazePlan => "maze_plan",
            ScenarioKind::StlTask => "stl_task",
        }
    }

    pub fn is_tracking(self) -> bool {
        matches!(self, ScenarioKind::TrackLinear | ScenarioKind::TrackDubins)
    }

    pub fn is_planning(self) -> bool {
        matches!(self, ScenarioKind::SimplePlan | ScenarioKind::MazePlan)
    }

    pub fn default_horizon(self) -> usize {
        match self {
            ScenarioKind::TrackLinear | ScenarioKind::TrackDubins => 50,
            ScenarioKind::SimplePlan => 80,
            ScenarioKind::MazePlan => 150,
            ScenarioKind::StlTask => 25,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_lowercase();
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name().replace('_', "") == norm)
            .ok_or_else(|| {
                format!(
                    "unknown scenario kind `{s}` (expected one of {})",
                    ScenarioKind::ALL.map(|k| k.name()).join(", ")
                )
            })
    }
}

/// A named rectangular region used by the STL task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedRegion {
    pub name: String,
    pub rect: Rect,
}

/// Grid maze over the workspace: `rows × cols` square cells, open passages
/// between adjacent cells given as pairs of cell indices `row * cols + col`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MazeLayout {
    pub rows: usize,
    pub cols: usize,
    pub origin: Point,
    pub cell: f64,
    pub passages: Vec<(usize, usize)>,
    pub start_cell: usize,
    pub goal_cell: usize,
}

impl MazeLayout {
    pub fn cell_of(&self, p: Point) -> Option<usize> {
        let c = ((p[0] - self.origin[0]) / self.cell).floor();
        let r = ((p[1] - self.origin[1]) / self.cell).floor();
        if c < 0.0 || r < 0.0 || c >= self.cols as f64 || r >= self.rows as f64 {
            return None;
        }
        Some(r as usize * self.cols + c as usize)
    }

    pub fn cell_center(&self, idx: usize) -> Point {
        let (r, c) = (idx / self.cols, idx % self.cols);
        [
            self.origin[0] + (c as f64 + 0.5) * self.cell,
            self.origin[1] + (r as f64 + 0.5) * self.cell,
        ]
    }

    pub fn is_open(&self, a: usize, b: usize) -> bool {
        self.passages
            .iter()
            .any(|&(x, y)| (x, y) == (a, b) || (y, x) == (a, b))
    }

    /// Cells reachable from `from` through open passages.
    pub fn reachable_cells(&self, from: usize) -> Vec<bool> {
        let n = self.rows * self.cols;
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([from]);
        seen[from] = true;
        while let Some(c) = queue.pop_front() {
            for &(a, b) in &self.passages {
                let next = if a == c {
                    b
                } else if b == c {
                    a
                } else {
                    continue;
                };
                if !seen[next] {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
        seen
    }
}

/// Fully specified task instance, deterministic in `(kind, seed)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub workspace: Workspace,
    pub model: DynamicsModel,
    pub integrator: Integrator,
    pub x0: State,
    pub goal: Option<Disc>,
    pub obstacles: Vec<Obstacle>,
    pub reference: Option<Trajectory>,
    pub horizon: usize,
    pub dt: f64,
    pub stl_regions: Vec<NamedRegion>,
    pub stl_formula: Option<StlFormula>,
    pub maze: Option<MazeLayout>,
}

impl ScenarioSpec {
    pub fn id(&self) -> String {
        format!("{}_{}", self.kind, self.seed)
    }

    pub fn region(&self, name: &str) -> Option<&Rect> {
        self.stl_regions
            .iter()
            .find(|r| r.name == name)
            .map(|r| &r.rect)
    }

    pub fn start_position(&self) -> Point {
        position(&self.x0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeReason {
    GoalReached,
    TrackingOk,
    Collision,
    GoalMissed,
    StlViolated,
    OutOfBounds,
}

impl OutcomeReason {
    pub fn name(self) -> &'static str {
        match self {
            OutcomeReason::GoalReached => "goal_reached",
            OutcomeReason::TrackingOk => "tracking_ok",
            OutcomeReason::Collision => "collision",
            OutcomeReason::GoalMissed => "goal_missed",
            OutcomeReason::StlViolated => "stl_violated",
            OutcomeReason::OutOfBounds => "out_of_bounds",
        }
    }
}

impl fmt::Display for OutcomeReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub success: bool,
    pub reason: OutcomeReason,
    /// RMS tracking error [m], STL robustness, or final goal distance [m].
    pub metric: f64,
    /// First offending state index for collisions and workspace exits.
    pub step: Option<usize>,
}

impl TaskOutcome {
    fn new(reason: OutcomeReason, metric: f64, step: Option<usize>) -> Self {
        Self {
            success: matches!(
                reason,
                OutcomeReason::GoalReached | OutcomeReason::TrackingOk
            ),
            reason,
            metric,
            step,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OutcomeError {
    #[error("trajectory has {got} states, expected horizon + 1 = {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{got} controls supplied, expected {expected}")]
    ControlCountMismatch { expected: usize, got: usize },
    #[error("scenario is missing its {0}")]
    IncompleteSpec(&'static str),
}

/// First state outside the workspace, if any.
fn first_exit(traj: &Trajectory, workspace: &Workspace) -> Option<usize> {
    traj.states
        .iter()
        .position(|x| !x.iter().all(|v| v.is_finite()) || !workspace.contains(position(x)))
}

/// First state index at which the path touches an obstacle.
fn first_collision(traj: &Trajectory, obstacles: &[Obstacle]) -> Option<usize> {
    if obstacles.is_empty() || traj.is_empty() {
        return None;
    }
    if collides_point(traj.position(0), obstacles) {
        return Some(0);
    }
    (1..traj.len()).find(|&k| collides_segment(traj.position(k - 1), traj.position(k), obstacles))
}

/// Every consecutive segment obstacle-free and every state inside the workspace.
pub fn trajectory_collision_free(
    traj: &Trajectory,
    obstacles: &[Obstacle],
    workspace: &Workspace,
) -> bool {
    first_exit(traj, workspace).is_none() && first_collision(traj, obstacles).is_none()
}

pub fn rms_tracking_error(traj: &Trajectory, reference: &Trajectory) -> f64 {
    let n = traj.len();
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = (0..n)
        .map(|k| {
            let d = dist(traj.position(k), position(reference.sample_held(k)));
            d * d
        })
        .sum();
    (sum / n as f64).sqrt()
}

/// Judges an executed trajectory against the scenario's objective.
/// `controls` may be empty when only states are available.
pub fn check_outcome(
    spec: &ScenarioSpec,
    traj: &Trajectory,
    controls: &[Control],
) -> Result<TaskOutcome, OutcomeError> {
    if traj.len() != spec.horizon + 1 {
        return Err(OutcomeError::LengthMismatch {
            expected: spec.horizon + 1,
            got: traj.len(),
        });
    }
    if !controls.is_empty() && controls.len() != spec.horizon {
        return Err(OutcomeError::ControlCountMismatch {
            expected: spec.horizon,
            got: controls.len(),
        });
    }
    if let Some(k) = first_exit(traj, &spec.workspace) {
        return Ok(TaskOutcome::new(OutcomeReason::OutOfBounds, 0.0, Some(k)));
    }
    if let Some(k) = first_collision(traj, &spec.obstacles) {
        return Ok(TaskOutcome::new(OutcomeReason::Collision, 0.0, Some(k)));
    }
    match spec.kind {
        ScenarioKind::TrackLinear | ScenarioKind::TrackDubins => {
            let reference = spec
                .reference
                .as_ref()
                .ok_or(OutcomeError::IncompleteSpec("reference"))?;
            let rms = rms_tracking_error(traj, reference);
            let reason = if rms <= TRACKING_TOLERANCE {
                OutcomeReason::TrackingOk
            } else {
                OutcomeReason::GoalMissed
            };
            Ok(TaskOutcome::new(reason, rms, None))
        }
        ScenarioKind::SimplePlan | ScenarioKind::MazePlan => {
            let goal = spec.goal.ok_or(OutcomeError::IncompleteSpec("goal"))?;
            let last = traj.position(traj.len() - 1);
            let d = dist(last, goal.center);
            let reason = if goal.contains(last) {
                OutcomeReason::GoalReached
            } else {
                OutcomeReason::GoalMissed
            };
            Ok(TaskOutcome::new(reason, d, None))
        }
        ScenarioKind::StlTask => {
            let formula = spec
                .stl_formula
                .as_ref()
                .ok_or(OutcomeError::IncompleteSpec("STL formula"))?;
            let rho = robustness(formula, traj, 0).unwrap_or(f64::NEG_INFINITY);
            let reason = if rho >= 0.0 {
                OutcomeReason::GoalReached
            } else {
                OutcomeReason::StlViolated
            };
            Ok(TaskOutcome::new(reason, rho, None))
        }
    }
}
