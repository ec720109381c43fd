//! Geometric and optimization-based planners: grid A*, RRT / RRT*, the
//! cross-entropy method and gradient-based trajectory optimization.

mod astar;
mod cem;
mod grad;
mod rrt;

use thiserror::Error;

use crate::dynamics::{DynamicsError, DynamicsModel, ModelKind, State, Trajectory};
use crate::environment::{dist, Point};

pub use astar::{astar, astar_on_grid, AstarParams, Connectivity, OccupancyGrid};
pub use cem::{cem_optimize, cem_plan, CemParams, CemPlanWeights, CemResult};
pub use grad::{grad_objective, grad_plan, GradParams, GradTarget, GradWeights};
pub use rrt::{rrt, RrtParams, RrtVariant};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("no path found")]
    NoPath,
    #[error("start {0:?} is blocked")]
    InvalidStart(Point),
    #[error("goal {0:?} is blocked")]
    InvalidGoal(Point),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("objective returned a non-finite value ({0})")]
    Objective(f64),
    #[error("optimization diverged at iteration {iteration}; lower the learning rate")]
    Diverged { iteration: usize },
    #[error("planning budget exhausted")]
    Timeout,
    #[error("dynamics: {0}")]
    Dynamics(#[from] DynamicsError),
}

/// Polyline through the plane.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub waypoints: Vec<Point>,
    /// Sum of the Euclidean segment lengths.
    pub total_cost: f64,
}

impl Path {
    pub fn new(waypoints: Vec<Point>) -> Self {
        let total_cost = waypoints.windows(2).map(|w| dist(w[0], w[1])).sum();
        Self {
            waypoints,
            total_cost,
        }
    }

    pub fn start(&self) -> Point {
        self.waypoints[0]
    }

    pub fn end(&self) -> Point {
        self.waypoints[self.waypoints.len() - 1]
    }

    /// Joins `other` to the end of `self`, skipping its first waypoint when
    /// it repeats the current end.
    pub fn extend(&mut self, other: &Path) {
        let skip = usize::from(self.waypoints.last() == other.waypoints.first());
        self.waypoints.extend(other.waypoints.iter().skip(skip));
        *self = Path::new(std::mem::take(&mut self.waypoints));
    }

    /// Point at arc length `s`, clamped to the ends. Also returns the unit
    /// direction of the segment containing it (zero on a degenerate path).
    pub fn point_at(&self, s: f64) -> (Point, Point) {
        let mut left = s.max(0.0);
        let mut last_dir = [0.0, 0.0];
        for w in self.waypoints.windows(2) {
            let len = dist(w[0], w[1]);
            if len == 0.0 {
                continue;
            }
            let dir = [(w[1][0] - w[0][0]) / len, (w[1][1] - w[0][1]) / len];
            if left <= len {
                return ([w[0][0] + dir[0] * left, w[0][1] + dir[1] * left], dir);
            }
            left -= len;
            last_dir = dir;
        }
        (self.end(), last_dir)
    }
}

/// Nominal reference speed along a path [m/s].
pub const REFERENCE_SPEED: f64 = 1.0;

/// Share of the horizon within which a timed path must be finished.
pub const REFERENCE_FIT: f64 = 0.8;

/// Time-parameterizes `path` as a reference of `horizon + 1` states sampled
/// every `dt`. The speed is [`REFERENCE_SPEED`], raised when needed so the
/// end is reached within [`REFERENCE_FIT`] of the horizon; afterwards the
/// last state is held. Velocity and heading components follow the path
/// direction for the double integrator and unicycle.
pub fn path_to_reference(
    path: &Path,
    model: &DynamicsModel,
    dt: f64,
    horizon: usize,
) -> Result<Trajectory, PlannerError> {
    if path.waypoints.is_empty() || horizon == 0 || !(dt > 0.0) {
        return Err(PlannerError::InvalidParams(
            "path_to_reference needs waypoints, a positive horizon and dt".into(),
        ));
    }
    if model.kind == ModelKind::Pendulum {
        return Err(PlannerError::InvalidParams(
            "a planar path cannot serve as a pendulum reference".into(),
        ));
    }
    let length = path.total_cost;
    let speed = REFERENCE_SPEED.max(length / (REFERENCE_FIT * horizon as f64 * dt));
    let (_, first_dir) = path.point_at(0.0);
    let mut heading = first_dir[1].atan2(first_dir[0]);
    let states = (0..=horizon)
        .map(|k| {
            let s = speed * k as f64 * dt;
            let (p, dir) = path.point_at(s);
            let moving = s < length;
            if moving && dir != [0.0, 0.0] {
                heading = dir[1].atan2(dir[0]);
            }
            match model.kind {
                ModelKind::DoubleIntegrator2D => {
                    let v = if moving { speed } else { 0.0 };
                    State::from_vec(vec![p[0], p[1], v * dir[0], v * dir[1]])
                }
                ModelKind::Unicycle => State::from_vec(vec![p[0], p[1], heading]),
                _ => State::from_vec(vec![p[0], p[1]]),
            }
        })
        .collect();
    Ok(Trajectory::new(dt, states))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_cost_and_lookup() {
        let p = Path::new(vec![[0.0, 0.0], [3.0, 0.0], [3.0, 4.0]]);
        assert_eq!(p.total_cost, 7.0);
        assert_eq!(p.point_at(5.0).0, [3.0, 2.0]);
        assert_eq!(p.point_at(9.0).0, [3.0, 4.0]);
        let single = Path::new(vec![[1.0, 1.0]]);
        assert_eq!(single.total_cost, 0.0);
        assert_eq!(single.point_at(1.0).0, [1.0, 1.0]);
    }

    #[test]
    fn reference_speed_and_hold() {
        let p = Path::new(vec![[0.0, 0.0], [2.0, 0.0]]);
        let si = DynamicsModel::single_integrator(3.0);
        let r = path_to_reference(&p, &si, 0.1, 50).unwrap();
        assert_eq!(r.len(), 51);
        assert!((r.states[10][0] - 1.0).abs() < 1e-12);
        assert_eq!(r.states[50][0], 2.0);

        let long = Path::new(vec![[0.0, 0.0], [8.0, 0.0]]);
        let r = path_to_reference(&long, &si, 0.1, 50).unwrap();
        assert!((r.states[40][0] - 8.0).abs() < 1e-9);

        let di = DynamicsModel::double_integrator(3.0);
        let r = path_to_reference(&p, &di, 0.1, 50).unwrap();
        assert_eq!(r.states[5][2], 1.0);
        assert_eq!(r.states[50][2], 0.0);
    }
}
