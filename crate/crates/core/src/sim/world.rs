use serde::{Deserialize, Serialize};

use super::SimError;

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Closed polyline along the border, counter-clockwise.
    pub fn outline(&self) -> Vec<Point> {
        vec![
            [self.x_min, self.y_min],
            [self.x_max, self.y_min],
            [self.x_max, self.y_max],
            [self.x_min, self.y_max],
            [self.x_min, self.y_min],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// A planar world: circular obstacles plus polyline walls (room walls,
/// coastlines). Obstacle ids number circles first, then wall segments in
/// polyline order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    #[serde(default)]
    pub label: String,
    pub bounds: Rect,
    #[serde(default)]
    pub circles: Vec<Circle>,
    #[serde(default)]
    pub walls: Vec<Vec<Point>>,
    pub target: Point,
    pub target_radius: f64,
    pub spawn: Pose2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn closest_point(&self, p: Point) -> Point {
        let d = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        if len2 == 0.0 {
            return self.a;
        }
        let t = (((p[0] - self.a[0]) * d[0] + (p[1] - self.a[1]) * d[1]) / len2).clamp(0.0, 1.0);
        [self.a[0] + t * d[0], self.a[1] + t * d[1]]
    }
}

pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl World {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.bounds.x_max > self.bounds.x_min && self.bounds.y_max > self.bounds.y_min) {
            return Err(SimError::InvalidWorld("empty bounds".into()));
        }
        if let Some(c) = self.circles.iter().find(|c| !(c.radius > 0.0)) {
            return Err(SimError::InvalidWorld(format!("circle radius {} must be > 0", c.radius)));
        }
        if !self.bounds.contains(self.target) {
            return Err(SimError::InvalidWorld("target outside bounds".into()));
        }
        if !self.bounds.contains([self.spawn.x, self.spawn.y]) {
            return Err(SimError::InvalidWorld("spawn outside bounds".into()));
        }
        if !(self.target_radius > 0.0) {
            return Err(SimError::InvalidWorld("target radius must be > 0".into()));
        }
        Ok(())
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.walls
            .iter()
            .flat_map(|poly| poly.windows(2).map(|w| Segment { a: w[0], b: w[1] }))
    }

    pub fn obstacle_count(&self) -> usize {
        self.circles.len() + self.segments().count()
    }

    /// Signed distance from `p` to the nearest obstacle surface (negative
    /// inside a circle), the obstacle id, and the closest surface point.
    pub fn nearest_obstacle(&self, p: Point) -> Option<(f64, usize, Point)> {
        let mut best: Option<(f64, usize, Point)> = None;
        let mut consider = |d: f64, id: usize, q: Point| {
            if best.is_none_or(|b| d < b.0) {
                best = Some((d, id, q));
            }
        };
        for (i, c) in self.circles.iter().enumerate() {
            let r = dist(p, c.center);
            let q = if r > 0.0 {
                [
                    c.center[0] + (p[0] - c.center[0]) * c.radius / r,
                    c.center[1] + (p[1] - c.center[1]) * c.radius / r,
                ]
            } else {
                [c.center[0] + c.radius, c.center[1]]
            };
            consider(r - c.radius, i, q);
        }
        let offset = self.circles.len();
        for (j, s) in self.segments().enumerate() {
            let q = s.closest_point(p);
            consider(dist(p, q), offset + j, q);
        }
        best
    }

    pub fn clearance(&self, p: Point) -> f64 {
        self.nearest_obstacle(p).map_or(f64::INFINITY, |b| b.0)
    }

    /// First intersection of the ray `origin + t * dir` (unit `dir`) with any
    /// obstacle for `t` in `[0, max_range]`.
    pub fn raycast(&self, origin: Point, dir: Point, max_range: f64) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        let mut consider = |t: f64, id: usize| {
            if t >= 0.0 && t <= max_range && best.is_none_or(|b| t < b.0) {
                best = Some((t, id));
            }
        };
        for (i, c) in self.circles.iter().enumerate() {
            if let Some(t) = ray_circle(origin, dir, c) {
                consider(t, i);
            }
        }
        let offset = self.circles.len();
        for (j, s) in self.segments().enumerate() {
            if let Some(t) = ray_segment(origin, dir, &s) {
                consider(t, offset + j);
            }
        }
        best
    }

    /// Reflection about the x axis.
    pub fn mirrored_x(&self) -> World {
        let m = |p: Point| [p[0], -p[1]];
        World {
            label: self.label.clone(),
            bounds: Rect::new(self.bounds.x_min, -self.bounds.y_max, self.bounds.x_max, -self.bounds.y_min),
            circles: self
                .circles
                .iter()
                .map(|c| Circle { center: m(c.center), radius: c.radius })
                .collect(),
            walls: self.walls.iter().map(|w| w.iter().copied().map(m).collect()).collect(),
            target: m(self.target),
            target_radius: self.target_radius,
            spawn: Pose2 { x: self.spawn.x, y: -self.spawn.y, heading: -self.spawn.heading },
        }
    }
}

/// Smallest `t >= 0` where the ray enters the circle; 0 if the origin is
/// already inside.
pub fn ray_circle(origin: Point, dir: Point, c: &Circle) -> Option<f64> {
    let oc = [origin[0] - c.center[0], origin[1] - c.center[1]];
    let b = oc[0] * dir[0] + oc[1] * dir[1];
    let cc = oc[0] * oc[0] + oc[1] * oc[1] - c.radius * c.radius;
    if cc <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}

pub fn ray_segment(origin: Point, dir: Point, s: &Segment) -> Option<f64> {
    let e = [s.b[0] - s.a[0], s.b[1] - s.a[1]];
    let denom = dir[0] * e[1] - dir[1] * e[0];
    if denom.abs() < 1e-15 {
        return None;
    }
    let w = [s.a[0] - origin[0], s.a[1] - origin[1]];
    let t = (w[0] * e[1] - w[1] * e[0]) / denom;
    let u = (w[0] * dir[1] - w[1] * dir[0]) / denom;
    (t >= 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
}
