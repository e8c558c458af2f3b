//! Procedural worlds: a cluttered room for the ground robot and a stretch of
//! coastline with islands for the boat.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::world::{dist, Circle, Point, Pose2, Rect, World};
use super::SimError;
use crate::rng::{stream, STREAM_WORLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldKind {
    IndoorCluttered,
    AquaticCoastline,
}

impl WorldKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::IndoorCluttered => "indoor_cluttered",
            Self::AquaticCoastline => "aquatic_coastline",
        }
    }
}

const ATTEMPTS: usize = 20_000;
/// Fresh restarts of the obstacle layout before giving up.
const LAYOUTS: usize = 50;

struct Layout {
    bounds: Rect,
    /// Region for obstacle centres.
    interior: Rect,
    count: (usize, usize),
    radius: (f64, f64),
    /// Minimum surface-to-surface gap between circles, m.
    gap: f64,
    spawn_region: Rect,
    target_region: Rect,
    clearance: f64,
    min_separation: f64,
    target_radius: f64,
}

fn uniform_in<R: Rng>(rng: &mut R, r: &Rect) -> Point {
    [rng.random_range(r.x_min..=r.x_max), rng.random_range(r.y_min..=r.y_max)]
}

fn place_circles<R: Rng>(rng: &mut R, l: &Layout) -> Result<Vec<Circle>, SimError> {
    let n = rng.random_range(l.count.0..=l.count.1);
    let mut best = 0;
    for _ in 0..LAYOUTS {
        let mut circles: Vec<Circle> = Vec::with_capacity(n);
        for _ in 0..ATTEMPTS / LAYOUTS {
            if circles.len() == n {
                return Ok(circles);
            }
            let c = Circle { center: uniform_in(rng, &l.interior), radius: rng.random_range(l.radius.0..=l.radius.1) };
            if circles.iter().all(|o| dist(o.center, c.center) - o.radius - c.radius >= l.gap) {
                circles.push(c);
            }
        }
        if circles.len() == n {
            return Ok(circles);
        }
        best = best.max(circles.len());
    }
    Err(SimError::Generation(format!("placed only {best} of {n} obstacles")))
}

fn place_endpoints<R: Rng>(rng: &mut R, world: &mut World, l: &Layout) -> Result<(), SimError> {
    for _ in 0..ATTEMPTS {
        let s = uniform_in(rng, &l.spawn_region);
        let t = uniform_in(rng, &l.target_region);
        if world.clearance(s) >= l.clearance && world.clearance(t) >= l.clearance && dist(s, t) >= l.min_separation {
            let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            world.spawn = Pose2 { x: s[0], y: s[1], heading };
            world.target = t;
            return Ok(());
        }
    }
    Err(SimError::Generation("no collision-free spawn/target pair found".into()))
}

fn indoor_layout() -> Layout {
    let bounds = Rect::new(0.0, 0.0, 10.0, 10.0);
    Layout {
        bounds,
        interior: Rect::new(1.0, 1.0, 9.0, 9.0),
        count: (8, 12),
        radius: (0.2, 0.45),
        gap: 1.0,
        spawn_region: Rect::new(0.6, 0.6, 9.4, 9.4),
        target_region: Rect::new(0.6, 0.6, 9.4, 9.4),
        clearance: 0.8,
        min_separation: 5.0,
        target_radius: 0.3,
    }
}

fn aquatic_layout() -> Layout {
    let bounds = Rect::new(0.0, 0.0, 20.0, 20.0);
    Layout {
        bounds,
        interior: Rect::new(3.0, 5.5, 17.0, 12.0),
        count: (3, 5),
        radius: (0.8, 1.6),
        gap: 2.0,
        spawn_region: Rect::new(2.0, 1.0, 18.0, 4.0),
        target_region: Rect::new(2.0, 9.0, 18.0, 14.0),
        clearance: 1.5,
        min_separation: 7.0,
        target_radius: 0.6,
    }
}

/// Seeded procedural world. The same `(kind, seed)` always yields the same
/// world.
pub fn generate_world(kind: WorldKind, seed: u64) -> Result<World, SimError> {
    let mut rng = stream(seed, STREAM_WORLD);
    let l = match kind {
        WorldKind::IndoorCluttered => indoor_layout(),
        WorldKind::AquaticCoastline => aquatic_layout(),
    };
    let mut walls = vec![l.bounds.outline()];
    if kind == WorldKind::AquaticCoastline {
        // wavy shoreline across the top of the map
        let base = rng.random_range(15.5..16.5);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let coast: Vec<Point> = (0..=20)
            .map(|i| {
                let x = i as f64;
                let y = base + 1.2 * (0.45 * x + phase).sin() + rng.random_range(-0.3..0.3);
                [x, y]
            })
            .collect();
        walls.push(coast);
    }
    let circles = place_circles(&mut rng, &l)?;
    let mut world = World {
        label: format!("{}#{seed}", kind.label()),
        bounds: l.bounds,
        circles,
        walls,
        target: [0.0, 0.0],
        target_radius: l.target_radius,
        spawn: Pose2 { x: 0.0, y: 0.0, heading: 0.0 },
    };
    place_endpoints(&mut rng, &mut world, &l)?;
    world.validate()?;
    Ok(world)
}
