//! Exact planar geometry for obstacles, regions and the workspace.

use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Distance from `p` to the closed segment `a`–`b`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

/// Closed axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    pub fn from_center(c: Point, half_w: f64, half_h: f64) -> Self {
        Self {
            min: [c[0] - half_w, c[1] - half_h],
            max: [c[0] + half_w, c[1] + half_h],
        }
    }

    pub fn is_valid(&self) -> bool {
        self.min[0] < self.max[0] && self.min[1] < self.max[1]
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    pub fn center(&self) -> Point {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
        ]
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn grown(&self, by: f64) -> Rect {
        Rect {
            min: [self.min[0] - by, self.min[1] - by],
            max: [self.max[0] + by, self.max[1] + by],
        }
    }

    /// Euclidean distance from `p` to the rectangle (0 inside).
    pub fn distance_to_point(&self, p: Point) -> f64 {
        let dx = (self.min[0] - p[0]).max(0.0).max(p[0] - self.max[0]);
        let dy = (self.min[1] - p[1]).max(0.0).max(p[1] - self.max[1]);
        dx.hypot(dy)
    }

    /// Signed distance: negative inside, by the depth to the nearest edge.
    pub fn signed_distance(&self, p: Point) -> f64 {
        if self.contains(p) {
            let depth = (p[0] - self.min[0])
                .min(self.max[0] - p[0])
                .min(p[1] - self.min[1])
                .min(self.max[1] - p[1]);
            -depth
        } else {
            self.distance_to_point(p)
        }
    }

    pub fn distance_to_rect(&self, other: &Rect) -> f64 {
        let dx = (self.min[0] - other.max[0])
            .max(other.min[0] - self.max[0])
            .max(0.0);
        let dy = (self.min[1] - other.max[1])
            .max(other.min[1] - self.max[1])
            .max(0.0);
        dx.hypot(dy)
    }

    /// Slab test: does the closed segment `a`–`b` touch the rectangle?
    pub fn intersects_segment(&self, a: Point, b: Point) -> bool {
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for axis in 0..2 {
            let d = b[axis] - a[axis];
            if d == 0.0 {
                if a[axis] < self.min[axis] || a[axis] > self.max[axis] {
                    return false;
                }
            } else {
                let mut ta = (self.min[axis] - a[axis]) / d;
                let mut tb = (self.max[axis] - a[axis]) / d;
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }

    /// Minimum distance between the segment `a`–`b` and the rectangle.
    pub fn segment_distance(&self, a: Point, b: Point) -> f64 {
        if self.intersects_segment(a, b) {
            return 0.0;
        }
        let corners = [
            self.min,
            [self.max[0], self.min[1]],
            self.max,
            [self.min[0], self.max[1]],
        ];
        let mut best = self.distance_to_point(a).min(self.distance_to_point(b));
        for c in corners {
            best = best.min(point_segment_distance(c, a, b));
        }
        best
    }
}

/// Obstacle shapes the environment can place.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Obstacle {
    Circle { center: Point, radius: f64 },
    Rect { min: Point, max: Point },
}

impl Obstacle {
    pub fn circle(center: Point, radius: f64) -> Self {
        Obstacle::Circle { center, radius }
    }

    pub fn rect(min: Point, max: Point) -> Self {
        Obstacle::Rect { min, max }
    }

    pub fn square(center: Point, side: f64) -> Self {
        let h = side / 2.0;
        Obstacle::rect(
            [center[0] - h, center[1] - h],
            [center[0] + h, center[1] + h],
        )
    }

    pub fn is_valid(&self) -> bool {
        match self {
            Obstacle::Circle { center, radius } => {
                *radius > 0.0 && center.iter().all(|v| v.is_finite())
            }
            Obstacle::Rect { min, max } => Rect::new(*min, *max).is_valid(),
        }
    }

    pub fn bounding_rect(&self) -> Rect {
        match *self {
            Obstacle::Circle { center, radius } => Rect::from_center(center, radius, radius),
            Obstacle::Rect { min, max } => Rect::new(min, max),
        }
    }

    /// Conservative inflation; rectangles grow into larger rectangles.
    pub fn inflated(&self, by: f64) -> Obstacle {
        match *self {
            Obstacle::Circle { center, radius } => Obstacle::Circle {
                center,
                radius: radius + by,
            },
            Obstacle::Rect { min, max } => {
                let r = Rect::new(min, max).grown(by);
                Obstacle::Rect {
                    min: r.min,
                    max: r.max,
                }
            }
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Obstacle::Circle { center, radius } => dist(p, center) <= radius,
            Obstacle::Rect { min, max } => Rect::new(min, max).contains(p),
        }
    }

    pub fn intersects_segment(&self, a: Point, b: Point) -> bool {
        match *self {
            Obstacle::Circle { center, radius } => point_segment_distance(center, a, b) <= radius,
            Obstacle::Rect { min, max } => Rect::new(min, max).intersects_segment(a, b),
        }
    }

    /// Distance from `p` to the obstacle boundary, negative inside.
    pub fn signed_distance(&self, p: Point) -> f64 {
        match *self {
            Obstacle::Circle { center, radius } => dist(p, center) - radius,
            Obstacle::Rect { min, max } => Rect::new(min, max).signed_distance(p),
        }
    }

    /// Gradient of [`signed_distance`](Self::signed_distance) with respect to `p`.
    pub fn signed_distance_gradient(&self, p: Point) -> Point {
        match *self {
            Obstacle::Circle { center, .. } => {
                let d = dist(p, center);
                if d == 0.0 {
                    [0.0, 0.0]
                } else {
                    [(p[0] - center[0]) / d, (p[1] - center[1]) / d]
                }
            }
            Obstacle::Rect { min, max } => {
                let r = Rect::new(min, max);
                if r.contains(p) {
                    let cands = [
                        (p[0] - min[0], [-1.0, 0.0]),
                        (max[0] - p[0], [1.0, 0.0]),
                        (p[1] - min[1], [0.0, -1.0]),
                        (max[1] - p[1], [0.0, 1.0]),
                    ];
                    let mut best = cands[0];
                    for c in &cands[1..] {
                        if c.0 < best.0 {
                            best = *c;
                        }
                    }
                    // d(-depth)/dp: moving along the outward normal reduces depth.
                    best.1
                } else {
                    let dx = if p[0] < min[0] {
                        p[0] - min[0]
                    } else if p[0] > max[0] {
                        p[0] - max[0]
                    } else {
                        0.0
                    };
                    let dy = if p[1] < min[1] {
                        p[1] - min[1]
                    } else if p[1] > max[1] {
                        p[1] - max[1]
                    } else {
                        0.0
                    };
                    let d = dx.hypot(dy);
                    if d == 0.0 {
                        [0.0, 0.0]
                    } else {
                        [dx / d, dy / d]
                    }
                }
            }
        }
    }

    /// Distance between the obstacle and a rectangle (0 when overlapping).
    pub fn distance_to_rect(&self, r: &Rect) -> f64 {
        match *self {
            Obstacle::Circle { center, radius } => (r.distance_to_point(center) - radius).max(0.0),
            Obstacle::Rect { min, max } => Rect::new(min, max).distance_to_rect(r),
        }
    }

    /// Distance between two obstacles (0 when overlapping); exact for every pair
    /// except rect–circle corners, where it is exact too since it goes through
    /// the point distance.
    pub fn distance_to(&self, other: &Obstacle) -> f64 {
        match (*self, *other) {
            (
                Obstacle::Circle {
                    center: c1,
                    radius: r1,
                },
                Obstacle::Circle {
                    center: c2,
                    radius: r2,
                },
            ) => (dist(c1, c2) - r1 - r2).max(0.0),
            (Obstacle::Circle { .. }, Obstacle::Rect { min, max }) => {
                self.distance_to_rect(&Rect::new(min, max))
            }
            (Obstacle::Rect { min, max }, _) => other.distance_to_rect(&Rect::new(min, max)),
        }
    }

    pub fn segment_distance(&self, a: Point, b: Point) -> f64 {
        match *self {
            Obstacle::Circle { center, radius } => {
                (point_segment_distance(center, a, b) - radius).max(0.0)
            }
            Obstacle::Rect { min, max } => Rect::new(min, max).segment_distance(a, b),
        }
    }
}

pub fn collides_point(p: Point, obstacles: &[Obstacle]) -> bool {
    obstacles.iter().any(|o| o.contains(p))
}

pub fn collides_segment(a: Point, b: Point, obstacles: &[Obstacle]) -> bool {
    obstacles.iter().any(|o| o.intersects_segment(a, b))
}

/// Smallest distance from `p` to any obstacle (infinite when there are none).
pub fn clearance(p: Point, obstacles: &[Obstacle]) -> f64 {
    obstacles
        .iter()
        .map(|o| o.signed_distance(p).max(0.0))
        .fold(f64::INFINITY, f64::min)
}

/// Goal or start region shaped as a disc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Point, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, p: Point) -> bool {
        dist(p, self.center) <= self.radius
    }
}

/// Axis-aligned bounds of the permissible workspace.
pub type Workspace = Rect;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn point_examples() {
        assert!(collides_point(
            [0.0, 0.0],
            &[Obstacle::circle([0.0, 0.0], 0.5)]
        ));
        assert!(!collides_point([5.0, 5.0], &[]));
        assert!(collides_point(
            [1.0, 1.0],
            &[Obstacle::rect([0.0, 0.0], [1.0, 1.0])]
        ));
    }

    #[test]
    fn segment_through_circle() {
        // Minimum point-to-segment distance is 0 ≤ 0.5.
        assert_eq!(
            point_segment_distance([0.0, 0.0], [-1.0, 0.0], [1.0, 0.0]),
            0.0
        );
        assert!(collides_segment(
            [-1.0, 0.0],
            [1.0, 0.0],
            &[Obstacle::circle([0.0, 0.0], 0.5)]
        ));
        assert!(!collides_segment(
            [-1.0, 1.0],
            [1.0, 1.0],
            &[Obstacle::circle([0.0, 0.0], 0.5)]
        ));
    }

    #[test]
    fn slab_test_cases() {
        let r = Rect::new([0.0, 0.0], [1.0, 1.0]);
        assert!(r.intersects_segment([-1.0, 0.5], [2.0, 0.5]));
        assert!(r.intersects_segment([0.5, 0.5], [0.6, 0.6]));
        assert!(!r.intersects_segment([-1.0, 2.0], [2.0, 2.0]));
        assert!(r.intersects_segment([-1.0, 1.0], [2.0, 1.0]));
        assert!(!r.intersects_segment([1.5, -1.0], [3.0, 0.5]));
        assert!(r.intersects_segment([-0.5, 0.5], [0.5, -0.5]));
    }

    fn random_obstacle(rng: &mut ChaCha8Rng) -> Obstacle {
        let c = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        if rng.random_bool(0.5) {
            Obstacle::circle(c, rng.random_range(0.1..1.5))
        } else {
            let hw = rng.random_range(0.1..1.5);
            let hh = rng.random_range(0.1..1.5);
            let r = Rect::from_center(c, hw, hh);
            Obstacle::rect(r.min, r.max)
        }
    }

    #[test]
    fn segment_test_agrees_with_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let o = random_obstacle(&mut rng);
            let a = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let b = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let exact = o.intersects_segment(a, b);
            let samples = 10_000;
            let sampled = (0..=samples).any(|i| {
                let t = i as f64 / samples as f64;
                o.contains([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
            });
            // No false negatives; a positive exact answer is confirmed once the
            // obstacle is inflated by 1e-3.
            if sampled {
                assert!(exact, "missed intersection {o:?} {a:?} {b:?}");
            }
            if exact {
                let inflated = o.inflated(1e-3);
                let hit = (0..=samples).any(|i| {
                    let t = i as f64 / samples as f64;
                    inflated.contains([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
                });
                assert!(hit, "spurious intersection {o:?} {a:?} {b:?}");
            }
        }
    }

    #[test]
    fn signed_distance_gradient_matches_finite_differences() {
        // The signed distance is C1 outside rectangles and away from circle
        // centres; the medial axis inside a rectangle is a kink, so only the
        // smooth region is sampled.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut checked = 0;
        while checked < 200 {
            let o = random_obstacle(&mut rng);
            let p = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let smooth = match o {
                Obstacle::Circle { center, .. } => dist(p, center) > 1e-3,
                Obstacle::Rect { .. } => o.signed_distance(p) > 1e-3,
            };
            if !smooth {
                continue;
            }
            checked += 1;
            let g = o.signed_distance_gradient(p);
            let h = 1e-7;
            for axis in 0..2 {
                let mut pp = p;
                let mut pm = p;
                pp[axis] += h;
                pm[axis] -= h;
                let fd = (o.signed_distance(pp) - o.signed_distance(pm)) / (2.0 * h);
                assert!(
                    (fd - g[axis]).abs() < 1e-5,
                    "{o:?} {p:?}: {fd} vs {}",
                    g[axis]
                );
            }
        }
    }

    #[test]
    fn distances() {
        let a = Obstacle::circle([0.0, 0.0], 1.0);
        let b = Obstacle::circle([3.0, 0.0], 1.0);
        assert!((a.distance_to(&b) - 1.0).abs() < 1e-12);
        let r = Obstacle::rect([2.0, -1.0], [3.0, 1.0]);
        assert!((a.distance_to(&r) - 1.0).abs() < 1e-12);
        assert!((r.distance_to(&a) - 1.0).abs() < 1e-12);
        let r2 = Obstacle::rect([4.0, 0.0], [5.0, 1.0]);
        assert!((r.distance_to(&r2) - 1.0).abs() < 1e-12);
    }
}
