use ctrlsel_core::dynamics::{Control, DynamicsModel, Integrator, State, Trajectory};
use ctrlsel_core::environment::{collides_segment, dist, Disc, Obstacle, Rect};
use ctrlsel_core::planners::{
    astar_on_grid, grad_objective, rrt, Connectivity, GradTarget, GradWeights, OccupancyGrid, Path,
    RrtParams, RrtVariant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plain O(V²) Dijkstra with its own neighbour rule: orthogonal steps cost
/// 1, diagonal steps √2 and need both orthogonal cells open.
fn dijkstra(blocked: &[bool], n: usize, start: usize, goal: usize, diagonal: bool) -> Option<f64> {
    let open = |x: i64, y: i64| {
        x >= 0 && y >= 0 && x < n as i64 && y < n as i64 && !blocked[y as usize * n + x as usize]
    };
    let mut d = vec![f64::INFINITY; n * n];
    let mut done = vec![false; n * n];
    d[start] = 0.0;
    loop {
        let mut u = None;
        for i in 0..n * n {
            if !done[i] && d[i].is_finite() && u.is_none_or(|j: usize| d[i] < d[j]) {
                u = Some(i);
            }
        }
        let u = u?;
        if u == goal {
            return Some(d[u]);
        }
        done[u] = true;
        let (x, y) = ((u % n) as i64, (u / n) as i64);
        let mut moves = vec![(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0)];
        if diagonal {
            for (dx, dy) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                moves.push((dx, dy, 2f64.sqrt()));
            }
        }
        for (dx, dy, c) in moves {
            let (nx, ny) = (x + dx, y + dy);
            let ok = open(nx, ny) && (dx == 0 || dy == 0 || (open(x + dx, y) && open(x, y + dy)));
            if ok {
                let v = ny as usize * n + nx as usize;
                d[v] = d[v].min(d[u] + c);
            }
        }
    }
}

#[test]
fn astar_matches_dijkstra_on_random_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 10;
    let mut compared = 0;
    let mut unreachable = 0;
    for case in 0..50 {
        let mut grid = OccupancyGrid::free([0.0, 0.0], 1.0, n, n);
        for b in grid.blocked.iter_mut() {
            *b = rng.random_bool(0.3);
        }
        let free: Vec<usize> = (0..n * n).filter(|&i| !grid.blocked[i]).collect();
        let start = free[rng.random_range(0..free.len())];
        let goal = free[rng.random_range(0..free.len())];
        for (conn, diagonal) in [(Connectivity::Four, false), (Connectivity::Eight, true)] {
            let oracle = dijkstra(&grid.blocked, n, start, goal, diagonal);
            let found = astar_on_grid(&grid, start, goal, conn);
            match (oracle, found) {
                (None, None) => unreachable += 1,
                (Some(c), Some((cells, cost))) => {
                    // Equal up to summation order of √2 terms.
                    assert!(
                        (c - cost).abs() < 1e-12,
                        "case {case}: dijkstra {c}, astar {cost}"
                    );
                    assert_eq!(cells[0], start);
                    assert_eq!(*cells.last().unwrap(), goal);
                    let mut walked = 0.0;
                    for w in cells.windows(2) {
                        let step = grid
                            .neighbors(w[0], conn)
                            .into_iter()
                            .find(|(c, _)| *c == w[1])
                            .expect("consecutive cells are neighbours");
                        walked += step.1;
                    }
                    assert!((walked - cost).abs() < 1e-12);
                    compared += 1;
                }
                (a, b) => panic!("case {case}: oracle {a:?}, astar {:?}", b.map(|x| x.1)),
            }
        }
    }
    assert!(
        compared >= 60,
        "{compared} compared, {unreachable} unreachable"
    );
}

fn random_world(rng: &mut ChaCha8Rng) -> Vec<Obstacle> {
    (0..rng.random_range(2..6))
        .map(|_| {
            let c = [rng.random_range(2.0..8.0), rng.random_range(2.0..8.0)];
            if rng.random_bool(0.5) {
                Obstacle::circle(c, rng.random_range(0.3..1.0))
            } else {
                Obstacle::square(c, rng.random_range(0.5..1.5))
            }
        })
        .collect()
}

fn free_point(rng: &mut ChaCha8Rng, obstacles: &[Obstacle]) -> [f64; 2] {
    loop {
        let p = [rng.random_range(0.5..9.5), rng.random_range(0.5..9.5)];
        if obstacles.iter().all(|o| o.signed_distance(p) > 0.3) {
            return p;
        }
    }
}

fn check_path(path: &Path, start: [f64; 2], goal: &Disc, obstacles: &[Obstacle], ws: &Rect) {
    assert_eq!(path.start(), start);
    assert!(goal.contains(path.end()));
    assert!(path.waypoints.iter().all(|p| ws.contains(*p)));
    for w in path.waypoints.windows(2) {
        assert!(
            !collides_segment(w[0], w[1], obstacles),
            "segment {:?} -> {:?} collides",
            w[0],
            w[1]
        );
    }
    let length: f64 = path.waypoints.windows(2).map(|w| dist(w[0], w[1])).sum();
    assert!((length - path.total_cost).abs() < 1e-9);
}

#[test]
fn rrt_paths_are_collision_free_with_correct_endpoints() {
    let ws = Rect::new([0.0, 0.0], [10.0, 10.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut found = 0;
    for run in 0..100 {
        let obstacles = random_world(&mut rng);
        let start = free_point(&mut rng, &obstacles);
        let goal = Disc::new(free_point(&mut rng, &obstacles), 0.3);
        let variant = if run % 2 == 0 {
            RrtVariant::Rrt
        } else {
            RrtVariant::RrtStar
        };
        let params = RrtParams {
            variant,
            max_iters: if variant == RrtVariant::Rrt {
                5000
            } else {
                1500
            },
            rng_seed: run,
            ..RrtParams::default()
        };
        if let Ok(path) = rrt(start, &goal, &obstacles, &ws, &params) {
            check_path(&path, start, &goal, &obstacles, &ws);
            assert_eq!(rrt(start, &goal, &obstacles, &ws, &params), Ok(path));
            found += 1;
        }
    }
    assert!(found >= 90, "only {found}/100 runs found a path");
}

#[test]
fn rrt_star_is_near_straight_line_in_empty_world() {
    let ws = Rect::new([0.0, 0.0], [10.0, 10.0]);
    let (start, goal) = ([1.0, 1.0], Disc::new([8.0, 7.0], 0.3));
    // The optimum ends on the disc boundary facing the start.
    let d = dist(start, goal.center) - goal.radius;
    for seed in 0..50 {
        let params = RrtParams {
            variant: RrtVariant::RrtStar,
            max_iters: 4000,
            rng_seed: seed,
            ..RrtParams::default()
        };
        let path = rrt(start, &goal, &[], &ws, &params).unwrap();
        check_path(&path, start, &goal, &[], &ws);
        assert!(
            path.total_cost <= 1.15 * d,
            "seed {seed}: cost {} vs d {d}",
            path.total_cost
        );
    }
}

#[test]
fn rrt_star_costs_less_than_rrt_on_average() {
    let ws = Rect::new([0.0, 0.0], [10.0, 10.0]);
    let obstacles = vec![
        Obstacle::circle([5.0, 5.0], 1.5),
        Obstacle::rect([2.0, 6.5], [3.0, 9.0]),
    ];
    let (start, goal) = ([1.0, 1.0], Disc::new([9.0, 9.0], 0.4));
    let (mut plain, mut star) = (0.0, 0.0);
    for seed in 0..50 {
        let base = RrtParams {
            max_iters: 3000,
            rng_seed: seed,
            ..RrtParams::default()
        };
        let a = rrt(start, &goal, &obstacles, &ws, &base).unwrap();
        let b = rrt(
            start,
            &goal,
            &obstacles,
            &ws,
            &RrtParams {
                variant: RrtVariant::RrtStar,
                ..base
            },
        )
        .unwrap();
        check_path(&b, start, &goal, &obstacles, &ws);
        plain += a.total_cost;
        star += b.total_cost;
    }
    assert!(
        star <= plain,
        "mean RRT* {} vs RRT {}",
        star / 50.0,
        plain / 50.0
    );
}

fn models() -> Vec<(DynamicsModel, State)> {
    vec![
        (
            DynamicsModel::single_integrator(5.0),
            State::from_vec(vec![1.0, 1.5]),
        ),
        (
            DynamicsModel::double_integrator(5.0),
            State::from_vec(vec![1.0, 1.5, 0.3, -0.2]),
        ),
        (
            DynamicsModel::unicycle(5.0, 5.0),
            State::from_vec(vec![1.0, 1.5, 0.4]),
        ),
        (
            DynamicsModel::pendulum(9.81, 1.0, 1.0, 5.0),
            State::from_vec(vec![0.3, -0.1]),
        ),
    ]
}

#[test]
fn adjoint_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let weights = GradWeights::default();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let (model, x0) = models()[case % 4].clone();
        let steps = 8;
        let dt = 0.1;
        let integrator = if case % 8 < 4 {
            Integrator::Euler
        } else {
            Integrator::Rk4
        };
        let limit = model.control_bounds[0].hi;
        // Strictly inside the bounds so saturation is inactive under perturbation.
        let controls: Vec<Control> = (0..steps)
            .map(|_| {
                Control::from_iterator(
                    model.control_dim(),
                    (0..model.control_dim()).map(|_| rng.random_range(-0.8 * limit..0.8 * limit)),
                )
            })
            .collect();
        let obstacles: Vec<Obstacle> = (0..3)
            .map(|_| {
                Obstacle::circle(
                    [rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)],
                    rng.random_range(0.2..0.8),
                )
            })
            .collect();
        let target = if case % 2 == 0 {
            GradTarget::Goal(Disc::new(
                [rng.random_range(2.0..4.0), rng.random_range(2.0..4.0)],
                0.2,
            ))
        } else {
            let states = (0..=steps)
                .map(|k| {
                    let mut s = x0.clone();
                    s[0] += 0.1 * k as f64;
                    s
                })
                .collect();
            GradTarget::Reference(Trajectory::new(dt, states))
        };
        let eval = |u: &[Control]| {
            grad_objective(
                &model, &x0, u, dt, integrator, &target, &obstacles, &weights,
            )
            .unwrap()
        };
        let (_, grad, _) = eval(&controls);
        let mut num = Vec::new();
        let mut ana = Vec::new();
        for k in 0..steps {
            for j in 0..model.control_dim() {
                let mut plus = controls.clone();
                plus[k][j] += h;
                let mut minus = controls.clone();
                minus[k][j] -= h;
                num.push((eval(&plus).0 - eval(&minus).0) / (2.0 * h));
                ana.push(grad[k][j]);
            }
        }
        let diff = num
            .iter()
            .zip(&ana)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = num.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
        let rel = diff / scale;
        worst = worst.max(rel);
        assert!(
            rel <= 1e-4,
            "case {case} ({:?}): relative error {rel:.3e}",
            model.kind
        );
    }
    assert!(worst.is_finite());
}
