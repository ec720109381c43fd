use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::feasibility::grid_path_exists;
use super::geometry::{clearance, dist, Disc, Obstacle, Point, Rect};
use super::{MazeLayout, NamedRegion, ScenarioKind, ScenarioSpec};
use crate::dynamics::{DynamicsModel, Trajectory};
use crate::stl::StlFormula;

pub const DT: f64 = 0.1;
const GOAL_RADIUS: f64 = 0.5;
/// Clearance required of the feasibility oracle's free cells.
const ORACLE_MARGIN: f64 = 0.15;
const ORACLE_RESOLUTION: f64 = 0.05;

fn workspace() -> Rect {
    Rect::new([0.0, 0.0], [10.0, 10.0])
}

fn rng_for(kind: ScenarioKind, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(kind as u64 + 1);
    rng
}

fn uniform_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Point {
    [rng.random_range(lo..hi), rng.random_range(lo..hi)]
}

pub fn generate_scenario(kind: ScenarioKind, seed: u64) -> ScenarioSpec {
    let mut rng = rng_for(kind, seed);
    let mut spec = match kind {
        ScenarioKind::TrackLinear => track_linear(&mut rng),
        ScenarioKind::TrackDubins => track_dubins(&mut rng),
        ScenarioKind::SimplePlan => simple_plan(&mut rng),
        ScenarioKind::MazePlan => maze_plan(&mut rng),
        ScenarioKind::StlTask => stl_task(&mut rng),
    };
    spec.kind = kind;
    spec.seed = seed;
    spec
}

fn base(model: DynamicsModel, x0: Vec<f64>, horizon: usize) -> ScenarioSpec {
    ScenarioSpec {
        kind: ScenarioKind::TrackLinear,
        seed: 0,
        workspace: workspace(),
        integrator: model.default_integrator(),
        model,
        x0: DVector::from_vec(x0),
        goal: None,
        obstacles: Vec::new(),
        reference: None,
        horizon,
        dt: DT,
        stl_regions: Vec::new(),
        stl_formula: None,
        maze: None,
    }
}

fn bezier(p: &[Point; 4], s: f64) -> Point {
    let c = [
        (1.0 - s).powi(3),
        3.0 * s * (1.0 - s).powi(2),
        3.0 * s * s * (1.0 - s),
        s.powi(3),
    ];
    let mut out = [0.0; 2];
    for (w, q) in c.iter().zip(p) {
        out[0] += w * q[0];
        out[1] += w * q[1];
    }
    out
}

fn track_linear(rng: &mut ChaCha8Rng) -> ScenarioSpec {
    let model = DynamicsModel::double_integrator(3.0);
    let horizon = ScenarioKind::TrackLinear.default_horizon();
    let amax = 0.8 * 3.0;
    loop {
        let ctrl = [
            uniform_point(rng, 2.0, 8.0),
            uniform_point(rng, 2.0, 8.0),
            uniform_point(rng, 2.0, 8.0),
            uniform_point(rng, 2.0, 8.0),
        ];
        let pos: Vec<Point> = (0..=horizon)
            .map(|k| bezier(&ctrl, k as f64 / horizon as f64))
            .collect();
        // Euler-consistent velocities so the reference is an exact rollout.
        let mut vel: Vec<Point> = pos
            .windows(2)
            .map(|w| [(w[1][0] - w[0][0]) / DT, (w[1][1] - w[0][1]) / DT])
            .collect();
        vel.push(vel[horizon - 1]);
        let feasible = vel.windows(2).all(|w| {
            ((w[1][0] - w[0][0]) / DT).abs() <= amax && ((w[1][1] - w[0][1]) / DT).abs() <= amax
        });
        if !feasible {
            continue;
        }
        let states = pos
            .iter()
            .zip(&vel)
            .map(|(p, v)| DVector::from_vec(vec![p[0], p[1], v[0], v[1]]))
            .collect();
        let reference = Trajectory::new(DT, states);
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let r = rng.random_range(0.05..0.3);
        let x0 = vec![
            pos[0][0] + r * theta.cos(),
            pos[0][1] + r * theta.sin(),
            vel[0][0],
            vel[0][1],
        ];
        let mut spec = base(model, x0, horizon);
        spec.reference = Some(reference);
        return spec;
    }
}

fn track_dubins(rng: &mut ChaCha8Rng) -> ScenarioSpec {
    let model = DynamicsModel::unicycle(3.0, 3.0);
    let horizon = ScenarioKind::TrackDubins.default_horizon();
    let method = model.default_integrator();
    let inner = Rect::new([0.5, 0.5], [9.5, 9.5]);
    loop {
        let start = uniform_point(rng, 2.0, 8.0);
        let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let v_mid = rng.random_range(1.0..1.4);
        let v_amp = rng.random_range(0.0..0.2);
        let w_amp = rng.random_range(0.2..1.0);
        let w_bias = rng.random_range(-0.4..0.4);
        let (f1, f2) = (rng.random_range(0.1..0.4), rng.random_range(0.1..0.4));
        let (ph1, ph2) = (
            rng.random_range(0.0..std::f64::consts::TAU),
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        let controls: Vec<_> = (0..horizon)
            .map(|k| {
                let t = k as f64 * DT;
                let v = v_mid + v_amp * (std::f64::consts::TAU * f1 * t + ph1).sin();
                let w = w_bias + w_amp * (std::f64::consts::TAU * f2 * t + ph2).sin();
                DVector::from_vec(vec![v, w])
            })
            .collect();
        let x_ref0 = DVector::from_vec(vec![start[0], start[1], heading]);
        let Ok(reference) = model.rollout(&x_ref0, &controls, DT, method) else {
            continue;
        };
        if !reference.positions().all(|p| inner.contains(p)) {
            continue;
        }
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let r = rng.random_range(0.0..0.2);
        let dth = rng.random_range(-0.15..0.15);
        let x0 = vec![
            start[0] + r * theta.cos(),
            start[1] + r * theta.sin(),
            heading + dth,
        ];
        let mut spec = base(model, x0, horizon);
        spec.reference = Some(reference);
        return spec;
    }
}

fn random_obstacle(rng: &mut ChaCha8Rng, scale: f64) -> Obstacle {
    let c = uniform_point(rng, 1.5, 8.5);
    if rng.random_bool(0.5) {
        Obstacle::circle(c, scale * rng.random_range(0.5..1.2))
    } else {
        Obstacle::square(c, scale * rng.random_range(1.0..2.0))
    }
}

fn simple_plan(rng: &mut ChaCha8Rng) -> ScenarioSpec {
    let ws = workspace();
    let horizon = ScenarioKind::SimplePlan.default_horizon();
    let min_sep = 0.4 * ws.diagonal();
    let mut attempts = 0usize;
    loop {
        // Shrink obstacles if placement keeps failing.
        let scale = 0.85f64.powi((attempts / 100) as i32);
        attempts += 1;
        let n = rng.random_range(3..=6);
        let mut obstacles: Vec<Obstacle> = Vec::with_capacity(n);
        let mut tries = 0;
        while obstacles.len() < n && tries < 200 {
            tries += 1;
            let o = random_obstacle(rng, scale);
            if obstacles.iter().all(|p| p.distance_to(&o) >= 0.4) {
                obstacles.push(o);
            }
        }
        if obstacles.len() < n {
            continue;
        }
        let start = uniform_point(rng, 0.5, 9.5);
        let goal = Disc::new(uniform_point(rng, 1.0, 9.0), GOAL_RADIUS);
        if clearance(start, &obstacles) < 0.5
            || clearance(goal.center, &obstacles) < GOAL_RADIUS + 0.3
            || dist(start, goal.center) < min_sep
        {
            continue;
        }
        if !grid_path_exists(
            &ws,
            &obstacles,
            start,
            &goal,
            ORACLE_RESOLUTION,
            ORACLE_MARGIN,
        ) {
            continue;
        }
        let mut spec = base(
            DynamicsModel::single_integrator(3.0),
            start.to_vec(),
            horizon,
        );
        spec.goal = Some(goal);
        spec.obstacles = obstacles;
        return spec;
    }
}

/// Uniform spanning tree of the grid graph by loop-erased random walks.
fn wilson_tree(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let n = rows * cols;
    let neighbours = |c: usize| -> Vec<usize> {
        let (r, k) = (c / cols, c % cols);
        let mut out = Vec::with_capacity(4);
        if r > 0 {
            out.push(c - cols);
        }
        if r + 1 < rows {
            out.push(c + cols);
        }
        if k > 0 {
            out.push(c - 1);
        }
        if k + 1 < cols {
            out.push(c + 1);
        }
        out
    };
    let mut in_tree = vec![false; n];
    let mut next = vec![usize::MAX; n];
    in_tree[rng.random_range(0..n)] = true;
    let mut edges = Vec::with_capacity(n - 1);
    for s in 0..n {
        let mut u = s;
        while !in_tree[u] {
            let nb = neighbours(u);
            next[u] = nb[rng.random_range(0..nb.len())];
            u = next[u];
        }
        let mut u = s;
        while !in_tree[u] {
            in_tree[u] = true;
            edges.push((u.min(next[u]), u.max(next[u])));
            u = next[u];
        }
    }
    edges.sort_unstable();
    edges
}

fn tree_distances(layout: &MazeLayout, from: usize) -> Vec<usize> {
    let n = layout.rows * layout.cols;
    let mut d = vec![usize::MAX; n];
    d[from] = 0;
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(c) = queue.pop_front() {
        for &(a, b) in &layout.passages {
            let o = if a == c {
                b
            } else if b == c {
                a
            } else {
                continue;
            };
            if d[o] == usize::MAX {
                d[o] = d[c] + 1;
                queue.push_back(o);
            }
        }
    }
    d
}

/// Thin wall rectangles on every closed shared edge between adjacent cells.
pub(crate) fn maze_walls(layout: &MazeLayout) -> Vec<Obstacle> {
    let t = 0.05 * layout.cell;
    let h = 0.5 * t;
    let (o, s) = (layout.origin, layout.cell);
    let mut walls = Vec::new();
    for r in 0..layout.rows {
        for c in 0..layout.cols {
            let idx = r * layout.cols + c;
            if c + 1 < layout.cols && !layout.is_open(idx, idx + 1) {
                let x = o[0] + (c + 1) as f64 * s;
                let (y0, y1) = (o[1] + r as f64 * s, o[1] + (r + 1) as f64 * s);
                walls.push(Obstacle::rect([x - h, y0 - h], [x + h, y1 + h]));
            }
            if r + 1 < layout.rows && !layout.is_open(idx, idx + layout.cols) {
                let y = o[1] + (r + 1) as f64 * s;
                let (x0, x1) = (o[0] + c as f64 * s, o[0] + (c + 1) as f64 * s);
                walls.push(Obstacle::rect([x0 - h, y - h], [x1 + h, y + h]));
            }
        }
    }
    walls
}

fn maze_plan(rng: &mut ChaCha8Rng) -> ScenarioSpec {
    let ws = workspace();
    let horizon = ScenarioKind::MazePlan.default_horizon();
    let (rows, cols) = (3, 3);
    let cell = ws.width() / cols as f64;
    loop {
        let mut layout = MazeLayout {
            rows,
            cols,
            origin: ws.min,
            cell,
            passages: wilson_tree(rng, rows, cols),
            start_cell: 0,
            goal_cell: 0,
        };
        let n = rows * cols;
        let mut best = 0;
        let mut pairs = Vec::new();
        for a in 0..n {
            let d = tree_distances(&layout, a);
            for (b, &dab) in d.iter().enumerate() {
                if dab > best {
                    best = dab;
                    pairs.clear();
                }
                if dab == best && a != b {
                    pairs.push((a, b));
                }
            }
        }
        let (sc, gc) = pairs[rng.random_range(0..pairs.len())];
        layout.start_cell = sc;
        layout.goal_cell = gc;

        let jitter = |rng: &mut ChaCha8Rng, p: Point| -> Point {
            [
                p[0] + rng.random_range(-0.4..0.4),
                p[1] + rng.random_range(-0.4..0.4),
            ]
        };
        let start = jitter(rng, layout.cell_center(sc));
        let goal = Disc::new(jitter(rng, layout.cell_center(gc)), GOAL_RADIUS);

        let mut obstacles = maze_walls(&layout);
        let clutter = rng.random_range(2..=4);
        let mut placed = 0;
        let mut tries = 0;
        while placed < clutter && tries < 200 {
            tries += 1;
            let c = rng.random_range(0..n);
            let centre = layout.cell_center(c);
            let half = 0.5 * cell - 0.9;
            let p = [
                centre[0] + rng.random_range(-half..half),
                centre[1] + rng.random_range(-half..half),
            ];
            let r = rng.random_range(0.3..0.5);
            let o = Obstacle::circle(p, r);
            if dist(p, start) < r + 0.8 || dist(p, goal.center) < r + goal.radius + 0.5 {
                continue;
            }
            if obstacles.iter().any(|w| w.distance_to(&o) < 0.4) {
                continue;
            }
            obstacles.push(o);
            placed += 1;
        }
        if placed < clutter
            || clearance(start, &obstacles) < 0.5
            || clearance(goal.center, &obstacles) < GOAL_RADIUS + 0.2
        {
            continue;
        }
        if !grid_path_exists(
            &ws,
            &obstacles,
            start,
            &goal,
            ORACLE_RESOLUTION,
            ORACLE_MARGIN,
        ) {
            continue;
        }
        let mut spec = base(
            DynamicsModel::single_integrator(3.0),
            start.to_vec(),
            horizon,
        );
        spec.goal = Some(goal);
        spec.obstacles = obstacles;
        spec.maze = Some(layout);
        return spec;
    }
}

fn linf(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

/// "Reach the key before entering the room; then reach the door and the goal."
pub(crate) fn stl_fixture_formula(
    key: Rect,
    door: Rect,
    room: Rect,
    goal: Rect,
    horizon: usize,
) -> StlFormula {
    StlFormula::And(vec![
        StlFormula::eventually(0, horizon, StlFormula::inside("key", key)),
        StlFormula::eventually(0, horizon, StlFormula::inside("door", door)),
        StlFormula::eventually(0, horizon, StlFormula::inside("goal", goal)),
        StlFormula::until(
            0,
            horizon,
            StlFormula::outside("room", room),
            StlFormula::inside("key", key),
        ),
    ])
}

fn stl_task(rng: &mut ChaCha8Rng) -> ScenarioSpec {
    let horizon = ScenarioKind::StlTask.default_horizon();
    let umax = 5.0;
    let budget = 0.8 * horizon as f64 * DT * umax;
    loop {
        let rx = rng.random_range(6.0..7.0);
        let h = rng.random_range(3.0..4.5);
        let ry = rng.random_range(0.5..9.5 - h);
        let room = Rect::new([rx, ry], [10.0, ry + h]);
        let dy = rng.random_range(ry + 0.2..ry + h - 1.4);
        let door = Rect::new([rx, dy], [rx + 0.6, dy + 1.2]);
        let gc = [
            rng.random_range(rx + 1.6..9.3),
            rng.random_range(ry + 0.8..ry + h - 0.8),
        ];
        let goal = Rect::from_center(gc, 0.5, 0.5);
        let kc = [rng.random_range(2.5..rx - 1.5), rng.random_range(1.0..9.0)];
        let key = Rect::from_center(kc, 0.5, 0.5);
        let x0 = [rng.random_range(0.5..1.5), rng.random_range(1.0..9.0)];
        let travel = linf(x0, key.center())
            + linf(key.center(), door.center())
            + linf(door.center(), goal.center());
        if travel > budget {
            continue;
        }
        let mut spec = base(DynamicsModel::single_integrator(umax), x0.to_vec(), horizon);
        spec.stl_formula = Some(stl_fixture_formula(key, door, room, goal, horizon));
        spec.stl_regions = vec![
            NamedRegion {
                name: "key".into(),
                rect: key,
            },
            NamedRegion {
                name: "door".into(),
                rect: door,
            },
            NamedRegion {
                name: "room".into(),
                rect: room,
            },
            NamedRegion {
                name: "goal".into(),
                rect: goal,
            },
        ];
        spec.goal = Some(Disc::new(gc, GOAL_RADIUS));
        return spec;
    }
}
