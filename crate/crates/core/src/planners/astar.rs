use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{Path, PlannerError};
use crate::environment::{Obstacle, Point, Rect};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    Eight,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AstarParams {
    /// Cell side [m].
    pub grid_resolution: f64,
    pub connectivity: Connectivity,
}

impl Default for AstarParams {
    fn default() -> Self {
        Self {
            grid_resolution: 0.25,
            connectivity: Connectivity::Eight,
        }
    }
}

/// Square-cell occupancy grid over a rectangle; cell `ix + iy·nx` has its
/// lower-left corner at `origin + (ix, iy)·resolution`.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    pub origin: Point,
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
    pub blocked: Vec<bool>,
}

impl OccupancyGrid {
    pub fn free(origin: Point, resolution: f64, nx: usize, ny: usize) -> Self {
        Self {
            origin,
            resolution,
            nx,
            ny,
            blocked: vec![false; nx * ny],
        }
    }

    /// Blocks every cell whose center lies within `resolution / 2` of an
    /// obstacle.
    pub fn from_obstacles(workspace: &Rect, obstacles: &[Obstacle], resolution: f64) -> Self {
        let nx = ((workspace.width() / resolution).ceil() as usize).max(1);
        let ny = ((workspace.height() / resolution).ceil() as usize).max(1);
        let mut grid = Self::free(workspace.min, resolution, nx, ny);
        let inflated: Vec<Obstacle> = obstacles
            .iter()
            .map(|o| o.inflated(0.5 * resolution))
            .collect();
        for idx in 0..nx * ny {
            let c = grid.center(idx);
            grid.blocked[idx] = inflated.iter().any(|o| o.contains(c));
        }
        grid
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell containing `p`; points on the far edges belong to the last cells.
    pub fn cell_of(&self, p: Point) -> Option<usize> {
        let fx = (p[0] - self.origin[0]) / self.resolution;
        let fy = (p[1] - self.origin[1]) / self.resolution;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= self.nx as f64 && fy <= self.ny as f64) {
            return None;
        }
        let ix = (fx.floor() as usize).min(self.nx - 1);
        let iy = (fy.floor() as usize).min(self.ny - 1);
        Some(iy * self.nx + ix)
    }

    pub fn center(&self, idx: usize) -> Point {
        let (ix, iy) = (idx % self.nx, idx / self.nx);
        [
            self.origin[0] + (ix as f64 + 0.5) * self.resolution,
            self.origin[1] + (iy as f64 + 0.5) * self.resolution,
        ]
    }

    /// Free neighbours with their step costs. Diagonal moves need both
    /// adjacent orthogonal cells free.
    pub fn neighbors(&self, idx: usize, conn: Connectivity) -> Vec<(usize, f64)> {
        let (ix, iy) = ((idx % self.nx) as i64, (idx / self.nx) as i64);
        let free = |x: i64, y: i64| {
            x >= 0
                && y >= 0
                && x < self.nx as i64
                && y < self.ny as i64
                && !self.blocked[(y as usize) * self.nx + x as usize]
        };
        let id = |x: i64, y: i64| (y as usize) * self.nx + x as usize;
        let mut out = Vec::with_capacity(8);
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            if free(ix + dx, iy + dy) {
                out.push((id(ix + dx, iy + dy), self.resolution));
            }
        }
        if conn == Connectivity::Eight {
            for (dx, dy) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                if free(ix + dx, iy + dy) && free(ix + dx, iy) && free(ix, iy + dy) {
                    out.push((
                        id(ix + dx, iy + dy),
                        self.resolution * std::f64::consts::SQRT_2,
                    ));
                }
            }
        }
        out
    }
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    h: f64,
    idx: usize,
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // Reversed for the max-heap: smallest (f, h, idx) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// A* between two cells with a Euclidean heuristic. Returns the cell
/// sequence and its cost, or `None` when the goal is unreachable.
pub fn astar_on_grid(
    grid: &OccupancyGrid,
    start: usize,
    goal: usize,
    conn: Connectivity,
) -> Option<(Vec<usize>, f64)> {
    let h = |i: usize| {
        let (a, b) = (grid.center(i), grid.center(goal));
        (a[0] - b[0]).hypot(a[1] - b[1])
    };
    let n = grid.len();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g[start] = 0.0;
    open.push(Open {
        f: h(start),
        h: h(start),
        idx: start,
    });
    while let Some(Open { idx, .. }) = open.pop() {
        if closed[idx] {
            continue;
        }
        if idx == goal {
            let mut cells = vec![goal];
            while *cells.last().unwrap() != start {
                cells.push(parent[*cells.last().unwrap()]);
            }
            cells.reverse();
            return Some((cells, g[goal]));
        }
        closed[idx] = true;
        for (next, step) in grid.neighbors(idx, conn) {
            let cand = g[idx] + step;
            if !closed[next] && cand < g[next] {
                g[next] = cand;
                parent[next] = idx;
                let hn = h(next);
                open.push(Open {
                    f: cand + hn,
                    h: hn,
                    idx: next,
                });
            }
        }
    }
    None
}

/// Grid A* from `start` to `goal`, returning the polyline of cell centers.
pub fn astar(
    start: Point,
    goal: Point,
    obstacles: &[Obstacle],
    workspace: &Rect,
    params: &AstarParams,
) -> Result<Path, PlannerError> {
    if !(params.grid_resolution > 0.0) {
        return Err(PlannerError::InvalidParams(
            "grid_resolution must be positive".into(),
        ));
    }
    let grid = OccupancyGrid::from_obstacles(workspace, obstacles, params.grid_resolution);
    let s = grid
        .cell_of(start)
        .filter(|&c| !grid.blocked[c])
        .ok_or(PlannerError::InvalidStart(start))?;
    let g = grid
        .cell_of(goal)
        .filter(|&c| !grid.blocked[c])
        .ok_or(PlannerError::InvalidGoal(goal))?;
    let (cells, _) = astar_on_grid(&grid, s, g, params.connectivity).ok_or(PlannerError::NoPath)?;
    Ok(Path::new(
        cells.into_iter().map(|c| grid.center(c)).collect(),
    ))
}
