//! Snapshot, track and summary files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{SimConfig, SimGrid, SimState, Snapshot, Trajectory};
use crate::error::Result;

/// Writes `<stem>.bin` (little-endian `f64`, `u` then `v`, ring-major
/// `n_rho × n_theta`) and the text header `<stem>.hdr`.
pub fn write_snapshot(dir: &Path, stem: &str, grid: &SimGrid, state: &SimState) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 * grid.len());
    for x in state.u.iter().chain(&state.v) {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(dir.join(format!("{stem}.bin")), bytes)?;
    let mut hdr = fs::File::create(dir.join(format!("{stem}.hdr")))?;
    writeln!(hdr, "format f64le")?;
    writeln!(hdr, "fields u v")?;
    writeln!(hdr, "layout ring-major")?;
    writeln!(hdr, "n_rho {}", grid.n_rho)?;
    writeln!(hdr, "n_theta {}", grid.n_theta)?;
    writeln!(hdr, "time {:.12e}", state.t)?;
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:.15e}")).collect::<Vec<_>>().join(" ");
    writeln!(hdr, "rho {}", join(&grid.rho))?;
    writeln!(hdr, "theta {}", join(&grid.theta))?;
    writeln!(hdr, "radius {}", join(&grid.radius))?;
    Ok(())
}

/// Writes `t,index,arc,height` rows for boundary spikes.
pub fn write_tracks_csv<W: Write>(mut out: W, snapshots: &[Snapshot]) -> Result<()> {
    writeln!(out, "t,index,arc,height")?;
    for snap in snapshots {
        for (k, spike) in snap.spikes.iter().enumerate() {
            if let Some(arc) = spike.arc {
                writeln!(out, "{:.10e},{},{:.12e},{:.12e}", snap.t, k, arc, spike.height)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary<'a> {
    pub config: &'a SimConfig,
    pub steps: usize,
    pub rejected_steps: usize,
    pub reference_parameter: f64,
    pub perimeter: f64,
    pub initial: &'a Snapshot,
    #[serde(rename = "final")]
    pub last: &'a Snapshot,
    pub notes: Vec<String>,
}

pub fn write_summary<W: Write>(out: W, config: &SimConfig, grid: &SimGrid, reference: f64, trajectory: &Trajectory) -> Result<()> {
    let summary = RunSummary {
        config,
        steps: config.steps(),
        rejected_steps: trajectory.rejected_steps,
        reference_parameter: reference,
        perimeter: grid.curve().perimeter(),
        initial: &trajectory.snapshots[0],
        last: trajectory.snapshots.last().expect("at least one snapshot"),
        notes: vec![
            "desk-scale parameters: comparisons with the asymptotic reduced model are direction and trend checks only".into(),
        ],
    };
    serde_json::to_writer_pretty(out, &summary).map_err(|e| crate::error::Error::Io(e.to_string()))?;
    Ok(())
}
