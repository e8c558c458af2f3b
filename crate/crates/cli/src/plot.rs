use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::Context;
use safenav_core::sim::{read_trajectory_csv, TrajectoryRow};

use crate::{CliError, CliResult, PlotKind};

/// Boat rows carry body velocities at these state slots.
const BOAT_V1: usize = 6;
const BOAT_W3: usize = 11;

fn actual_velocity(row: &TrajectoryRow) -> [f64; 2] {
    match row.state.len() {
        12 => [row.state[BOAT_V1], row.state[BOAT_W3]],
        // the unicycle applies its command directly
        _ => row.r,
    }
}

fn emit(rows: &[(usize, TrajectoryRow)], kind: PlotKind, out: &mut dyn Write) -> io::Result<()> {
    match kind {
        PlotKind::Tracking => {
            writeln!(out, "episode,t,ref_v1,v1,ref_w3,w3")?;
            for (ep, r) in rows {
                let [v1, w3] = actual_velocity(r);
                writeln!(out, "{ep},{},{},{v1},{},{w3}", r.t, r.r[0], r.r[1])?;
            }
        }
        PlotKind::Trajectory => {
            writeln!(out, "episode,x,y,events")?;
            for (ep, r) in rows {
                let [x, y] = r.position();
                writeln!(out, "{ep},{x},{y},{}", r.flags)?;
            }
        }
        PlotKind::HProfile => {
            writeln!(out, "episode,t,h,d_safe")?;
            for (ep, r) in rows {
                writeln!(out, "{ep},{},{},{}", r.t, r.h, r.d_safe)?;
            }
        }
    }
    out.flush()
}

pub fn plot(input: &Path, kind: PlotKind, out: Option<&Path>) -> CliResult<()> {
    let f = File::open(input).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", input.display())))?;
    let rows = read_trajectory_csv(f, input).map_err(|e| CliError::Usage(e.to_string()))?;
    match out {
        Some(p) => {
            let mut f = io::BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
            emit(&rows, kind, &mut f).with_context(|| format!("writing {}", p.display()))?;
        }
        None => match emit(&rows, kind, &mut io::stdout().lock()) {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {}
            r => r.context("writing to stdout")?,
        },
    }
    Ok(())
}
