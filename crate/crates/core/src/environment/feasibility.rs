use std::collections::VecDeque;

use super::geometry::{clearance, dist, Disc, Obstacle, Point, Workspace};

/// Breadth-first search on an 8-connected grid of cell centres at spacing
/// `resolution`. A cell is free when its centre lies inside the workspace and
/// at least `margin` away from every obstacle; diagonal moves also require
/// both orthogonal neighbours to be free. Succeeds when a free cell inside
/// `goal` is reached from the cell containing `start`.
pub fn grid_path_exists(
    workspace: &Workspace,
    obstacles: &[Obstacle],
    start: Point,
    goal: &Disc,
    resolution: f64,
    margin: f64,
) -> bool {
    let nx = (workspace.width() / resolution).ceil() as usize;
    let ny = (workspace.height() / resolution).ceil() as usize;
    if nx == 0 || ny == 0 {
        return false;
    }
    let center = |i: usize, j: usize| -> Point {
        [
            workspace.min[0] + (i as f64 + 0.5) * resolution,
            workspace.min[1] + (j as f64 + 0.5) * resolution,
        ]
    };
    let free: Vec<bool> = (0..nx * ny)
        .map(|idx| {
            let p = center(idx % nx, idx / nx);
            workspace.contains(p) && clearance(p, obstacles) >= margin
        })
        .collect();
    let cell = |p: Point| -> (usize, usize) {
        let i = ((p[0] - workspace.min[0]) / resolution)
            .floor()
            .clamp(0.0, (nx - 1) as f64);
        let j = ((p[1] - workspace.min[1]) / resolution)
            .floor()
            .clamp(0.0, (ny - 1) as f64);
        (i as usize, j as usize)
    };
    let (si, sj) = cell(start);
    if !free[sj * nx + si] {
        return false;
    }
    let mut seen = vec![false; nx * ny];
    seen[sj * nx + si] = true;
    let mut queue = VecDeque::from([(si, sj)]);
    while let Some((i, j)) = queue.pop_front() {
        if dist(center(i, j), goal.center) <= goal.radius {
            return true;
        }
        for (di, dj) in [
            (-1, 0),
            (1, 0),
            (0, -1),
            (0, 1),
            (-1, -1),
            (-1, 1),
            (1, -1),
            (1, 1),
        ] {
            let (ni, nj) = (i as isize + di, j as isize + dj);
            if ni < 0 || nj < 0 || ni >= nx as isize || nj >= ny as isize {
                continue;
            }
            let (ni, nj) = (ni as usize, nj as usize);
            let idx = nj * nx + ni;
            if seen[idx] || !free[idx] {
                continue;
            }
            if di != 0 && dj != 0 && !(free[j * nx + ni] && free[nj * nx + i]) {
                continue;
            }
            seen[idx] = true;
            queue.push_back((ni, nj));
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Rect;

    #[test]
    fn open_world_connected_and_wall_blocks() {
        let ws = Rect::new([0.0, 0.0], [10.0, 10.0]);
        let goal = Disc::new([9.0, 5.0], 0.5);
        assert!(grid_path_exists(&ws, &[], [1.0, 5.0], &goal, 0.05, 0.1));
        let wall = [Obstacle::rect([4.0, -1.0], [4.2, 11.0])];
        assert!(!grid_path_exists(&ws, &wall, [1.0, 5.0], &goal, 0.05, 0.1));
        let gap = [Obstacle::rect([4.0, -1.0], [4.2, 9.0])];
        assert!(grid_path_exists(&ws, &gap, [1.0, 5.0], &goal, 0.05, 0.1));
    }
}
