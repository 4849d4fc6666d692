//! On-disk formats: NLSC binary field snapshots and CSV time series.
//!
//! Snapshot layout (little-endian): magic `NLSC`, version u32 = 1,
//! dim u32, points-per-dim u32, half_width f64, then interleaved
//! (re, im) f64 pairs in row-major order.
//!
//! CSV series carry a header row and full-precision doubles (Rust's
//! shortest round-trip formatting).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::control::ControlPath;
use crate::error::Error;
use crate::spectral::{Grid, RealField, State};
use crate::Result;

const MAGIC: &[u8; 4] = b"NLSC";
const VERSION: u32 = 1;

/// Write a complex field snapshot.
pub fn write_state(path: &Path, s: &State) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(s.grid.dim() as u32).to_le_bytes())?;
    w.write_all(&(s.grid.points_per_dim() as u32).to_le_bytes())?;
    w.write_all(&s.grid.half_width().to_le_bytes())?;
    for v in &s.values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Write a real field as a snapshot with zero imaginary parts.
pub fn write_real_field(path: &Path, f: &RealField) -> Result<()> {
    let state = State {
        grid: f.grid.clone(),
        values: f.values.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
    };
    write_state(path, &state)
}

/// Export a 1D real field as CSV (x, value).
pub fn write_real_field_csv(path: &Path, f: &RealField) -> Result<()> {
    if f.grid.dim() != 1 {
        return Err(Error::invalid("CSV field export is defined for dim = 1 only"));
    }
    let x: Vec<f64> = (0..f.grid.cells()).map(|j| f.grid.position(j)[0]).collect();
    write_csv(path, &["x", "value"], &[&x, &f.values])
}

/// Read a snapshot back, reconstructing its grid.
pub fn read_state(path: &Path) -> Result<State> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("{}: bad magic {magic:?}", path.display())));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(Error::Format(format!("{}: unsupported version {version}", path.display())));
    }
    r.read_exact(&mut u32buf)?;
    let dim = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf)?;
    let points = u32::from_le_bytes(u32buf) as usize;
    let mut f64buf = [0u8; 8];
    r.read_exact(&mut f64buf)?;
    let half_width = f64::from_le_bytes(f64buf);
    let grid = Grid::new(dim, points, half_width)?;
    let mut values = Vec::with_capacity(grid.cells());
    for _ in 0..grid.cells() {
        r.read_exact(&mut f64buf)?;
        let re = f64::from_le_bytes(f64buf);
        r.read_exact(&mut f64buf)?;
        let im = f64::from_le_bytes(f64buf);
        values.push(Complex64::new(re, im));
    }
    Ok(State { grid, values })
}

/// Write a CSV with header and column-per-series rows.
pub fn write_csv(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    if columns.iter().any(|c| c.len() != columns[0].len()) {
        return Err(Error::Format("csv columns have unequal lengths".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for i in 0..columns[0].len() {
        let row: Vec<String> = columns.iter().map(|c| format!("{}", c[i])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Trajectory diagnostics CSV: t, mass, omega, energy.
pub fn write_diagnostics(path: &Path, traj: &crate::forward::Trajectory) -> Result<()> {
    let t: Vec<f64> = (0..=traj.n_steps).map(|k| k as f64 * traj.dt).collect();
    write_csv(path, &["t", "mass", "omega", "energy"], &[&t, &traj.mass, &traj.omega, &traj.energy])
}

/// Control CSV: t, phi.
pub fn write_control(path: &Path, c: &ControlPath) -> Result<()> {
    let t: Vec<f64> = c.node_times().collect();
    write_csv(path, &["t", "phi"], &[&t, c.nodes()])
}

/// Read a control from CSV columns (t, phi); the time column fixes the
/// horizon and must be uniform.
pub fn read_control(path: &Path) -> Result<ControlPath> {
    let r = BufReader::new(File::open(path)?);
    let mut t = Vec::new();
    let mut phi = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            continue; // header
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(ts), Some(ps)) = (parts.next(), parts.next()) else {
            return Err(Error::Format(format!("{}: row {i} needs t,phi", path.display())));
        };
        t.push(ts.trim().parse::<f64>().map_err(|e| {
            Error::Format(format!("{}: row {i} column t: {e}", path.display()))
        })?);
        phi.push(ps.trim().parse::<f64>().map_err(|e| {
            Error::Format(format!("{}: row {i} column phi: {e}", path.display()))
        })?);
    }
    if t.len() < 3 {
        return Err(Error::Format(format!("{}: need at least 3 rows", path.display())));
    }
    let dt = t[1] - t[0];
    for w in t.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0) {
            return Err(Error::Format(format!("{}: time column is not uniform", path.display())));
        }
    }
    let horizon = t[t.len() - 1] - t[0];
    ControlPath::from_nodes(horizon, phi)
}

/// Pairing series CSV: t, g.
pub fn write_pairing(path: &Path, dt: f64, g: &[f64]) -> Result<()> {
    let t: Vec<f64> = (0..g.len()).map(|k| k as f64 * dt).collect();
    write_csv(path, &["t", "g"], &[&t, g])
}

/// Gradient CSV over nodes k = 1..n: t, grad, h_lift.
pub fn write_gradient(
    path: &Path,
    grad: &crate::gradient::GradientPath,
    lift: &crate::gradient::GradientPath,
) -> Result<()> {
    let t: Vec<f64> = (1..=grad.values.len()).map(|k| k as f64 * grad.dt).collect();
    write_csv(path, &["t", "grad", "h_lift"], &[&t, &grad.values, &lift.values])
}

/// Optimizer iterate log CSV.
pub fn write_iterates(path: &Path, iterates: &[crate::optimize::IterateRecord]) -> Result<()> {
    let iter: Vec<f64> = iterates.iter().map(|r| r.iter as f64).collect();
    let terminal: Vec<f64> = iterates.iter().map(|r| r.cost.terminal).collect();
    let work: Vec<f64> = iterates.iter().map(|r| r.cost.work).collect();
    let penalty: Vec<f64> = iterates.iter().map(|r| r.cost.penalty).collect();
    let total: Vec<f64> = iterates.iter().map(|r| r.cost.total).collect();
    let grad_h1: Vec<f64> = iterates.iter().map(|r| r.grad_h1).collect();
    let step: Vec<f64> = iterates.iter().map(|r| r.step).collect();
    write_csv(
        path,
        &["iter", "terminal", "work", "penalty", "total", "grad_h1", "step"],
        &[&iter, &terminal, &work, &penalty, &total, &grad_h1, &step],
    )
}
