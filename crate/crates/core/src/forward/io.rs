//! Trajectory export.
//!
//! Binary checkpoint layout, all little-endian:
//!
//! ```text
//! magic      8 bytes  "ACTTRAJ1"
//! grid kind  u8       1 = interval, 2 = rectangle
//! interval:  u64 n
//! rectangle: u64 nx, u64 ny, f64 lx, f64 ly, u8 edge kinds (bit k set = edge k Dirichlet;
//!            edges ordered left, right, bottom, top)
//! nt         u64
//! tau        f64
//! state_len  u64
//! payload    (nt + 1) * state_len f64, row-major (one row per time sample)
//! ```

use std::io::{BufRead, Read, Write};

use super::{TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::grid_ops::{BoundaryKind, Edge, Grid, Grid1D, Grid2D};

const MAGIC: &[u8; 8] = b"ACTTRAJ1";

/// CSV with header `t,x0,x1,...` and one row per time sample.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    write!(out, "t")?;
    for i in 0..traj.state_dim() {
        write!(out, ",x{i}")?;
    }
    writeln!(out)?;
    for (k, x) in traj.states.iter().enumerate() {
        write!(out, "{:.16e}", traj.time_grid.time(k))?;
        for v in x {
            write!(out, ",{v:.16e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_checkpoint<W: Write>(traj: &Trajectory, grid: &Grid, mut out: W) -> Result<()> {
    grid.check_len(&traj.states[0])?;
    out.write_all(MAGIC)?;
    match grid {
        Grid::OneD(g) => {
            out.write_all(&[1])?;
            out.write_all(&(g.n() as u64).to_le_bytes())?;
        }
        Grid::TwoD(g) => {
            out.write_all(&[2])?;
            out.write_all(&(g.nx() as u64).to_le_bytes())?;
            out.write_all(&(g.ny() as u64).to_le_bytes())?;
            out.write_all(&g.lx().to_le_bytes())?;
            out.write_all(&g.ly().to_le_bytes())?;
            let mut bits = 0u8;
            for (k, d) in g.dirichlet_mask().iter().enumerate() {
                if *d {
                    bits |= 1 << k;
                }
            }
            out.write_all(&[bits])?;
        }
    }
    out.write_all(&(traj.time_grid.nt() as u64).to_le_bytes())?;
    out.write_all(&traj.time_grid.tau().to_le_bytes())?;
    out.write_all(&(traj.state_dim() as u64).to_le_bytes())?;
    for x in &traj.states {
        for v in x {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_checkpoint<R: BufRead>(mut r: R) -> Result<(Grid, Trajectory)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let grid = match read_u8(&mut r)? {
        1 => Grid::OneD(Grid1D::new(read_u64(&mut r)? as usize)?),
        2 => {
            let nx = read_u64(&mut r)? as usize;
            let ny = read_u64(&mut r)? as usize;
            let lx = read_f64(&mut r)?;
            let ly = read_f64(&mut r)?;
            let bits = read_u8(&mut r)?;
            let mut kinds = [BoundaryKind::Neumann; 4];
            for (k, _) in Edge::ALL.iter().enumerate() {
                if bits & (1 << k) != 0 {
                    kinds[k] = BoundaryKind::Dirichlet;
                }
            }
            Grid::TwoD(Grid2D::new(nx, ny, lx, ly, kinds)?)
        }
        k => return Err(Error::Format(format!("unknown grid kind {k}"))),
    };
    let nt = read_u64(&mut r)? as usize;
    let tau = read_f64(&mut r)?;
    let len = read_u64(&mut r)? as usize;
    if len != grid.len() {
        return Err(Error::Format(format!("state length {len} does not match grid ({})", grid.len())));
    }
    let time_grid = TimeGrid::new(tau, nt)?;
    let mut states = Vec::with_capacity(nt + 1);
    for _ in 0..=nt {
        let mut x = Vec::with_capacity(len);
        for _ in 0..len {
            x.push(read_f64(&mut r)?);
        }
        states.push(x);
    }
    Ok((grid, Trajectory { time_grid, states }))
}
