use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Path, PlannerError};
use crate::budget::Deadline;
use crate::environment::{
    clearance, collides_point, collides_segment, dist, Disc, Obstacle, Point, Rect,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RrtVariant {
    Rrt,
    RrtStar,
}

#[derive(Clone, Debug)]
pub struct RrtParams {
    /// Maximum edge length [m].
    pub step_size: f64,
    /// Probability of sampling the goal center.
    pub goal_bias: f64,
    pub max_iters: usize,
    pub variant: RrtVariant,
    /// Neighbourhood for parent choice and rewiring (RRT* only) [m].
    pub rewire_radius: f64,
    pub rng_seed: u64,
    /// Obstacles are inflated by this margin for every collision check,
    /// capped at 90 % of the start's own clearance [m].
    pub clearance: f64,
    pub deadline: Deadline,
}

impl Default for RrtParams {
    fn default() -> Self {
        Self {
            step_size: 0.4,
            goal_bias: 0.05,
            max_iters: 5000,
            variant: RrtVariant::Rrt,
            rewire_radius: 1.0,
            rng_seed: 0,
            clearance: 0.0,
            deadline: Deadline::unbounded(),
        }
    }
}

impl RrtParams {
    fn validate(&self) -> Result<(), PlannerError> {
        let bad = |m: &str| Err(PlannerError::InvalidParams(m.into()));
        if !(self.step_size > 0.0) {
            return bad("step_size must be positive");
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return bad("goal_bias must lie in [0, 1]");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.rewire_radius > 0.0) || !(self.clearance >= 0.0) {
            return bad("rewire_radius must be positive and clearance non-negative");
        }
        Ok(())
    }
}

struct Tree {
    points: Vec<Point>,
    parent: Vec<usize>,
    cost: Vec<f64>,
    children: Vec<Vec<usize>>,
}

impl Tree {
    fn nearest(&self, p: Point) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, q) in self.points.iter().enumerate() {
            let d = dist(*q, p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    fn push(&mut self, p: Point, parent: usize) -> usize {
        let id = self.points.len();
        self.points.push(p);
        self.parent.push(parent);
        self.cost
            .push(self.cost[parent] + dist(self.points[parent], p));
        self.children.push(Vec::new());
        self.children[parent].push(id);
        id
    }

    fn reparent(&mut self, node: usize, new_parent: usize) {
        let old = self.parent[node];
        self.children[old].retain(|&c| c != node);
        self.parent[node] = new_parent;
        self.children[new_parent].push(node);
        let delta = self.cost[new_parent] + dist(self.points[new_parent], self.points[node])
            - self.cost[node];
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            self.cost[n] += delta;
            stack.extend(self.children[n].iter().copied());
        }
    }

    fn path_to(&self, mut node: usize) -> Path {
        let mut pts = vec![self.points[node]];
        while node != 0 {
            node = self.parent[node];
            pts.push(self.points[node]);
        }
        pts.reverse();
        Path::new(pts)
    }
}

/// RRT or RRT* from `start` until a node lands in `goal`. RRT returns the
/// first such branch; RRT* spends the whole iteration budget and returns
/// the cheapest one.
pub fn rrt(
    start: Point,
    goal: &Disc,
    obstacles: &[Obstacle],
    workspace: &Rect,
    params: &RrtParams,
) -> Result<Path, PlannerError> {
    params.validate()?;
    if collides_point(start, obstacles) || !workspace.contains(start) {
        return Err(PlannerError::InvalidStart(start));
    }
    let margin = params.clearance.min(0.9 * clearance(start, obstacles));
    let inflated: Vec<Obstacle> = obstacles.iter().map(|o| o.inflated(margin)).collect();
    let blocked = |a: Point, b: Point| collides_segment(a, b, &inflated);

    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut tree = Tree {
        points: vec![start],
        parent: vec![0],
        cost: vec![0.0],
        children: vec![Vec::new()],
    };
    if goal.contains(start) {
        return Ok(tree.path_to(0));
    }
    let star = params.variant == RrtVariant::RrtStar;
    let mut best_goal: Option<usize> = None;

    for _ in 0..params.max_iters {
        if params.deadline.expired() {
            return Err(PlannerError::Timeout);
        }
        let sample = if rng.random::<f64>() < params.goal_bias {
            goal.center
        } else {
            [
                rng.random_range(workspace.min[0]..=workspace.max[0]),
                rng.random_range(workspace.min[1]..=workspace.max[1]),
            ]
        };
        let near = tree.nearest(sample);
        let from = tree.points[near];
        let d = dist(from, sample);
        if d == 0.0 {
            continue;
        }
        let s = params.step_size.min(d) / d;
        let new = [
            from[0] + s * (sample[0] - from[0]),
            from[1] + s * (sample[1] - from[1]),
        ];
        if !workspace.contains(new) || blocked(from, new) {
            continue;
        }
        let id = if star {
            let neighbors: Vec<usize> = (0..tree.points.len())
                .filter(|&i| dist(tree.points[i], new) <= params.rewire_radius)
                .collect();
            let mut parent = near;
            let mut best = tree.cost[near] + dist(from, new);
            for &i in &neighbors {
                let c = tree.cost[i] + dist(tree.points[i], new);
                if c < best && !blocked(tree.points[i], new) {
                    parent = i;
                    best = c;
                }
            }
            let id = tree.push(new, parent);
            for &i in &neighbors {
                if i != parent
                    && tree.cost[id] + dist(new, tree.points[i]) < tree.cost[i]
                    && !blocked(new, tree.points[i])
                {
                    tree.reparent(i, id);
                }
            }
            id
        } else {
            tree.push(new, near)
        };
        if goal.contains(new) {
            if !star {
                return Ok(tree.path_to(id));
            }
            best_goal = Some(id);
        }
    }
    if star {
        // Rewiring may have lowered the cost of any goal node, so rescan.
        best_goal = (0..tree.points.len())
            .filter(|&i| goal.contains(tree.points[i]))
            .min_by(|&a, &b| tree.cost[a].total_cmp(&tree.cost[b]))
            .or(best_goal);
    }
    best_goal
        .map(|g| tree.path_to(g))
        .ok_or(PlannerError::NoPath)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ws() -> Rect {
        Rect::new([0.0, 0.0], [10.0, 10.0])
    }

    #[test]
    fn finds_path_in_empty_world() {
        let goal = Disc::new([9.0, 9.0], 0.5);
        let p = RrtParams {
            max_iters: 2000,
            ..RrtParams::default()
        };
        let path = rrt([1.0, 1.0], &goal, &[], &ws(), &p).unwrap();
        assert_eq!(path.start(), [1.0, 1.0]);
        assert!(goal.contains(path.end()));
    }

    #[test]
    fn enclosed_goal_has_no_path() {
        let goal = Disc::new([8.0, 8.0], 0.3);
        let ring = vec![
            Obstacle::rect([7.0, 7.0], [9.0, 7.2]),
            Obstacle::rect([7.0, 8.8], [9.0, 9.0]),
            Obstacle::rect([7.0, 7.0], [7.2, 9.0]),
            Obstacle::rect([8.8, 7.0], [9.0, 9.0]),
        ];
        let p = RrtParams {
            max_iters: 500,
            ..RrtParams::default()
        };
        assert_eq!(
            rrt([1.0, 1.0], &goal, &ring, &ws(), &p),
            Err(PlannerError::NoPath)
        );
    }

    #[test]
    fn reproducible_and_rewired_costs_consistent() {
        let goal = Disc::new([8.0, 2.0], 0.5);
        let obs = vec![Obstacle::circle([5.0, 2.0], 1.0)];
        let p = RrtParams {
            variant: RrtVariant::RrtStar,
            max_iters: 1500,
            rng_seed: 9,
            ..RrtParams::default()
        };
        let a = rrt([1.0, 2.0], &goal, &obs, &ws(), &p).unwrap();
        let b = rrt([1.0, 2.0], &goal, &obs, &ws(), &p).unwrap();
        assert_eq!(a, b);
        let recomputed: f64 = a.waypoints.windows(2).map(|w| dist(w[0], w[1])).sum();
        assert!((recomputed - a.total_cost).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        let goal = Disc::new([8.0, 2.0], 0.5);
        let p = RrtParams {
            goal_bias: 1.5,
            ..RrtParams::default()
        };
        assert!(matches!(
            rrt([1.0, 1.0], &goal, &[], &ws(), &p),
            Err(PlannerError::InvalidParams(_))
        ));
    }
}
