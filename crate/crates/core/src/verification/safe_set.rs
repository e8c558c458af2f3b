use serde::{Deserialize, Serialize};

use super::enumerate::EnumerationResult;
use super::interval::IntervalBox;
use super::VerificationError;
use crate::policy::POSE_OFFSET;
use crate::sim::world::{Point, Rect};

/// One enumerated unsafe box together with its position-space centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnsafeArea {
    #[serde(rename = "box")]
    pub bx: IntervalBox,
    /// Midpoint of the box restricted to the position coordinates.
    pub p_area: Point,
    pub violation_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeRegion {
    pub root: IntervalBox,
    pub unsafe_areas: Vec<UnsafeArea>,
    pub complete: bool,
}

/// Union over regions of the root box minus its unsafe boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeSet {
    /// Observation coordinates holding the agent position `(x, y)`.
    pub position_dims: [usize; 2],
    pub regions: Vec<SafeRegion>,
}

/// An unsafe box near the agent, as returned by [`match_unsafe_regions`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnsafeMatch<'a> {
    pub area: &'a UnsafeArea,
    pub region: usize,
    /// Distance from the agent to the box footprint, 0 inside.
    pub distance: f64,
}

impl SafeSet {
    pub fn empty(position_dims: [usize; 2]) -> Self {
        Self { position_dims, regions: vec![] }
    }

    pub fn default_position_dims() -> [usize; 2] {
        [POSE_OFFSET, POSE_OFFSET + 1]
    }

    pub fn unsafe_areas(&self) -> impl Iterator<Item = (usize, &UnsafeArea)> {
        self.regions.iter().enumerate().flat_map(|(i, r)| r.unsafe_areas.iter().map(move |a| (i, a)))
    }

    pub fn unsafe_count(&self) -> usize {
        self.regions.iter().map(|r| r.unsafe_areas.len()).sum()
    }

    /// In some root box and in no unsafe box of any region. Where roots
    /// overlap, an unsafe verdict from either one wins.
    pub fn contains(&self, obs: &[f64]) -> bool {
        self.regions.iter().any(|r| r.root.contains(obs))
            && !self.unsafe_areas().any(|(_, a)| a.bx.contains(obs))
    }

    /// Position footprint of a box: `[x_lo, y_lo, x_hi, y_hi]`.
    pub fn footprint(&self, bx: &IntervalBox) -> Rect {
        let [i, j] = self.position_dims;
        Rect::new(bx.lo[i], bx.lo[j], bx.hi[i], bx.hi[j])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("safe set serializes")
    }
}

/// Builds the safe set from per-region enumeration results.
pub fn build_safe_set(results: &[EnumerationResult], position_dims: [usize; 2]) -> Result<SafeSet, VerificationError> {
    let mut regions = Vec::with_capacity(results.len());
    for (k, res) in results.iter().enumerate() {
        if position_dims.iter().any(|&d| d >= res.root.dim()) {
            return Err(VerificationError::DimensionMismatch { expected: position_dims[1] + 1, got: res.root.dim() });
        }
        if !res.complete {
            log::warn!("region {k}: enumeration incomplete, unexplored boxes count as unsafe");
        }
        for (j, other) in results[..k].iter().enumerate() {
            if res.root.interiors_overlap(&other.root) {
                log::warn!("regions {j} and {k} overlap; unsafe verdicts take precedence");
            }
        }
        let unsafe_areas = res
            .unsafe_leaves
            .iter()
            .map(|u| {
                let [i, j] = position_dims;
                UnsafeArea {
                    bx: u.bx.clone(),
                    p_area: [0.5 * (u.bx.lo[i] + u.bx.hi[i]), 0.5 * (u.bx.lo[j] + u.bx.hi[j])],
                    violation_rate: u.violation_rate,
                }
            })
            .collect();
        regions.push(SafeRegion { root: res.root.clone(), unsafe_areas, complete: res.complete });
    }
    Ok(SafeSet { position_dims, regions })
}

fn rect_distance(r: &Rect, p: Point) -> f64 {
    let dx = (r.x_min - p[0]).max(0.0).max(p[0] - r.x_max);
    let dy = (r.y_min - p[1]).max(0.0).max(p[1] - r.y_max);
    dx.hypot(dy)
}

/// Unsafe boxes whose position footprint lies within `r_look` of `position`,
/// nearest first (ties keep enumeration order).
pub fn match_unsafe_regions(position: Point, set: &SafeSet, r_look: f64) -> Vec<UnsafeMatch<'_>> {
    let mut out: Vec<UnsafeMatch<'_>> = set
        .unsafe_areas()
        .filter_map(|(region, area)| {
            let distance = rect_distance(&set.footprint(&area.bx), position);
            (distance <= r_look).then_some(UnsafeMatch { area, region, distance })
        })
        .collect();
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    out
}

/// Same as [`match_unsafe_regions`] with the position read from an
/// observation vector.
pub fn match_observation<'a>(obs: &[f64], set: &'a SafeSet, r_look: f64) -> Vec<UnsafeMatch<'a>> {
    let [i, j] = set.position_dims;
    match_unsafe_regions([obs[i], obs[j]], set, r_look)
}

/// Per-cell fraction of position space covered by unsafe footprints.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    pub bounds: Rect,
    /// Cells per axis.
    pub resolution: usize,
    /// Row-major, `cells[row][col]`, row 0 at `y_min`.
    pub cells: Vec<Vec<f64>>,
}

/// Area of the union of rectangles, by coordinate compression.
fn union_area(rects: &[Rect]) -> f64 {
    if rects.is_empty() {
        return 0.0;
    }
    let mut xs: Vec<f64> = rects.iter().flat_map(|r| [r.x_min, r.x_max]).collect();
    let mut ys: Vec<f64> = rects.iter().flat_map(|r| [r.y_min, r.y_max]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let mut area = 0.0;
    for xw in xs.windows(2) {
        for yw in ys.windows(2) {
            let (cx, cy) = (0.5 * (xw[0] + xw[1]), 0.5 * (yw[0] + yw[1]));
            if rects.iter().any(|r| cx >= r.x_min && cx <= r.x_max && cy >= r.y_min && cy <= r.y_max) {
                area += (xw[1] - xw[0]) * (yw[1] - yw[0]);
            }
        }
    }
    area
}

fn clip(r: &Rect, c: &Rect) -> Option<Rect> {
    let out = Rect::new(r.x_min.max(c.x_min), r.y_min.max(c.y_min), r.x_max.min(c.x_max), r.y_max.min(c.y_max));
    (out.x_max > out.x_min && out.y_max > out.y_min).then_some(out)
}

pub fn density_map(set: &SafeSet, bounds: Rect, resolution: usize) -> Result<DensityMap, VerificationError> {
    if resolution == 0 {
        return Err(VerificationError::InvalidConfig("density resolution must be positive".into()));
    }
    if !(bounds.width() > 0.0 && bounds.height() > 0.0) {
        return Err(VerificationError::InvalidConfig("density bounds are empty".into()));
    }
    let footprints: Vec<Rect> = set.unsafe_areas().map(|(_, a)| set.footprint(&a.bx)).collect();
    let cw = bounds.width() / resolution as f64;
    let ch = bounds.height() / resolution as f64;
    let mut cells = vec![vec![0.0; resolution]; resolution];
    for (row, line) in cells.iter_mut().enumerate() {
        for (col, v) in line.iter_mut().enumerate() {
            let cell = Rect::new(
                bounds.x_min + col as f64 * cw,
                bounds.y_min + row as f64 * ch,
                bounds.x_min + (col + 1) as f64 * cw,
                bounds.y_min + (row + 1) as f64 * ch,
            );
            let clipped: Vec<Rect> = footprints.iter().filter_map(|f| clip(f, &cell)).collect();
            *v = (union_area(&clipped) / (cw * ch)).clamp(0.0, 1.0);
        }
    }
    Ok(DensityMap { bounds, resolution, cells })
}

impl DensityMap {
    /// Plain-text grid: `#` metadata lines, then one row per line (top row
    /// first), values separated by spaces.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# density of unsafe footprints\n# bounds {} {} {} {}\n# resolution {}\n# rows top to bottom\n",
            self.bounds.x_min, self.bounds.y_min, self.bounds.x_max, self.bounds.y_max, self.resolution
        );
        for row in self.cells.iter().rev() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn total_mass(&self) -> f64 {
        let cell = self.bounds.width() * self.bounds.height() / (self.resolution * self.resolution) as f64;
        self.cells.iter().flatten().sum::<f64>() * cell
    }
}
