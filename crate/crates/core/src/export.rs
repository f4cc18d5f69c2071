//! CSV and JSON writers for trajectories, grids and traces.
//!
//! Numbers are written with `{:.16e}` so that files round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::ode::Trajectory;
use crate::wave1d::{CharacteristicGrid, RadiationTrace};

fn header(out: &mut impl Write, first: &str, n: usize) -> std::io::Result<()> {
    write!(out, "{first}")?;
    for a in 0..n {
        write!(out, ",phi_{a}")?;
    }
    writeln!(out)
}

fn row(out: &mut impl Write, s: f64, phi: &[f64]) -> std::io::Result<()> {
    write!(out, "{s:.16e}")?;
    for x in phi {
        write!(out, ",{x:.16e}")?;
    }
    writeln!(out)
}

/// `s,phi_0,...`
pub fn write_trajectory(out: &mut impl Write, traj: &Trajectory) -> Result<()> {
    header(out, "s", traj.dim())?;
    for p in &traj.samples {
        row(out, p.s, &p.phi)?;
    }
    Ok(())
}

/// `s,phi_0,...`
pub fn write_trace(out: &mut impl Write, trace: &RadiationTrace) -> Result<()> {
    header(out, "s", trace.dim())?;
    for p in &trace.samples {
        row(out, p.s, &p.phi)?;
    }
    Ok(())
}

/// Long form `u,v,field,psi` over every computed node.
pub fn write_grid(out: &mut impl Write, grid: &CharacteristicGrid) -> Result<()> {
    writeln!(out, "u,v,field,psi")?;
    for i in 0..=grid.nu {
        let u = grid.u(i);
        for j in 0..=grid.nv {
            if !grid.is_valid(i, j) {
                continue;
            }
            let v = grid.v(j);
            for (a, x) in grid.node(i, j).iter().enumerate() {
                writeln!(out, "{u:.16e},{v:.16e},{a},{x:.16e}")?;
            }
        }
    }
    Ok(())
}

pub fn write_grid_meta(out: &mut impl Write, grid: &CharacteristicGrid) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, &grid.meta())
        .map_err(|e| crate::error::Error::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn to_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn save_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    to_file(path, |w| write_trajectory(w, traj))
}

pub fn save_trace(path: &Path, trace: &RadiationTrace) -> Result<()> {
    to_file(path, |w| write_trace(w, trace))
}

/// Writes `<stem>.csv` and `<stem>.meta.json` next to each other.
pub fn save_grid(dir: &Path, stem: &str, grid: &CharacteristicGrid) -> Result<()> {
    to_file(&dir.join(format!("{stem}.csv")), |w| write_grid(w, grid))?;
    to_file(&dir.join(format!("{stem}.meta.json")), |w| write_grid_meta(w, grid))
}
