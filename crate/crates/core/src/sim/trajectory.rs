use std::io::{Read, Write};
use std::path::Path;

use super::episode::StepDiagnostics;
use super::{EpisodeResult, SimError};
use crate::dynamics::PlantState;

const UNICYCLE_STATE: [&str; 3] = ["x", "y", "theta"];
const BOAT_STATE: [&str; 12] = ["x", "y", "z", "phi", "theta", "psi", "v1", "v2", "v3", "w1", "w2", "w3"];

/// One control period. The state is the one the command was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub state: Vec<f64>,
    pub r_dnn: [f64; 2],
    pub r_cbf: [f64; 2],
    pub r: [f64; 2],
    /// Thrust `(left, right)`; NaN for the unicycle.
    pub u: [f64; 2],
    pub h: f64,
    pub d_safe: f64,
    pub nearest_obstacle_distance: f64,
    pub flags: String,
}

impl TrajectoryRow {
    pub(crate) fn new(t: f64, state: &PlantState, d: &StepDiagnostics, success: bool) -> Self {
        let state = match state {
            PlantState::Unicycle(s) => s.as_array().to_vec(),
            PlantState::Boat(s) => {
                vec![s.px, s.py, s.pz, s.phi, s.theta, s.psi, s.v1, s.v2, s.v3, s.w1, s.w2, s.w3]
            }
        };
        let f = &d.filter;
        let mut flags = Vec::new();
        for (on, name) in [
            (f.active, "filtered"),
            (f.fallback, "fallback"),
            (d.detour, "detour"),
            (d.collided, "collision"),
            (success, "success"),
        ] {
            if on {
                flags.push(name);
            }
        }
        Self {
            t,
            state,
            r_dnn: f.r_dnn.as_array(),
            r_cbf: f.r_cbf.as_array(),
            r: f.r.as_array(),
            u: d.thrust.map_or([f64::NAN; 2], |u| [u.left, u.right]),
            h: d.min_h.unwrap_or(f64::NAN),
            d_safe: f.d_safe.unwrap_or(f64::NAN),
            nearest_obstacle_distance: d.clearance,
            flags: flags.join("|"),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.state[0], self.state[1]]
    }
}

fn state_names(len: usize) -> Option<&'static [&'static str]> {
    match len {
        3 => Some(&UNICYCLE_STATE),
        12 => Some(&BOAT_STATE),
        _ => None,
    }
}

const TAIL: [&str; 13] = [
    "r_dnn_v1",
    "r_dnn_w3",
    "r_cbf_v1",
    "r_cbf_w3",
    "r_v1",
    "r_w3",
    "u_left",
    "u_right",
    "h",
    "d_safe",
    "nearest_obstacle_distance",
    "flags",
    "episode",
];

/// Writes trajectories as CSV. Every row carries its episode index; all
/// episodes must share one agent model.
pub fn write_trajectory_csv<W: Write>(out: W, episodes: &[(usize, &[TrajectoryRow])]) -> Result<(), SimError> {
    let err = |e: csv::Error| SimError::Log { path: "<output>".into(), message: e.to_string() };
    let mut w = csv::Writer::from_writer(out);
    let dim = episodes.iter().flat_map(|(_, rows)| rows.first()).map(|r| r.state.len()).next().unwrap_or(3);
    let names = state_names(dim).ok_or_else(|| SimError::Log {
        path: "<output>".into(),
        message: format!("unsupported state dimension {dim}"),
    })?;
    let header: Vec<&str> = std::iter::once("t").chain(names.iter().copied()).chain(TAIL).collect();
    w.write_record(&header).map_err(err)?;
    for (episode, rows) in episodes {
        for r in rows.iter() {
            if r.state.len() != dim {
                return Err(SimError::Log { path: "<output>".into(), message: "mixed agent models".into() });
            }
            let mut rec: Vec<String> = Vec::with_capacity(header.len());
            rec.push(r.t.to_string());
            rec.extend(r.state.iter().map(f64::to_string));
            rec.extend(
                r.r_dnn
                    .iter()
                    .chain(&r.r_cbf)
                    .chain(&r.r)
                    .chain(&r.u)
                    .chain([&r.h, &r.d_safe, &r.nearest_obstacle_distance])
                    .map(f64::to_string),
            );
            rec.push(r.flags.clone());
            rec.push(episode.to_string());
            w.write_record(&rec).map_err(err)?;
        }
    }
    w.flush().map_err(|e| SimError::Log { path: "<output>".into(), message: e.to_string() })
}

/// Parses a trajectory CSV back into `(episode, row)` pairs.
pub fn read_trajectory_csv<R: Read>(input: R, path: &Path) -> Result<Vec<(usize, TrajectoryRow)>, SimError> {
    let bad = |m: String| SimError::Log { path: path.display().to_string(), message: m };
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    let dim = header.len().checked_sub(1 + TAIL.len()).ok_or_else(|| bad("too few columns".into()))?;
    let names = state_names(dim).ok_or_else(|| bad(format!("unexpected column count {}", header.len())))?;
    let expected: Vec<&str> = std::iter::once("t").chain(names.iter().copied()).chain(TAIL).collect();
    if header.iter().ne(expected.iter().copied()) {
        return Err(bad("unexpected header".into()));
    }
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |j: usize| -> Result<f64, SimError> {
            rec[j].trim().parse::<f64>().map_err(|e| bad(format!("row {}: column {}: {e}", i + 1, expected[j])))
        };
        let nums: Vec<f64> = (0..header.len() - 2).map(num).collect::<Result<_, _>>()?;
        let k = 1 + dim;
        let episode = rec[header.len() - 1].trim().parse().map_err(|e| bad(format!("row {}: episode: {e}", i + 1)))?;
        out.push((
            episode,
            TrajectoryRow {
                t: nums[0],
                state: nums[1..k].to_vec(),
                r_dnn: [nums[k], nums[k + 1]],
                r_cbf: [nums[k + 2], nums[k + 3]],
                r: [nums[k + 4], nums[k + 5]],
                u: [nums[k + 6], nums[k + 7]],
                h: nums[k + 8],
                d_safe: nums[k + 9],
                nearest_obstacle_distance: nums[k + 10],
                flags: rec[header.len() - 2].to_string(),
            },
        ));
    }
    if out.is_empty() {
        return Err(bad("no data rows".into()));
    }
    Ok(out)
}

/// One JSON object per collision, for the harvesting step of enumeration.
pub fn write_collisions_jsonl<W: Write>(mut out: W, results: &[EpisodeResult]) -> std::io::Result<()> {
    for (i, r) in results.iter().enumerate() {
        if let Some(c) = &r.collision {
            let mut c = c.clone();
            c.episode = i;
            serde_json::to_writer(&mut out, &c)?;
            writeln!(out)?;
        }
    }
    Ok(())
}
