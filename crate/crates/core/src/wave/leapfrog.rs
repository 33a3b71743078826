//! Explicit leapfrog time stepping with pluggable forcing and per-level observers.

use crate::error::{Error, Result};
use crate::field::BoundarySignal;
use crate::grid::Grid;

/// Right-hand side F of □u = F, evaluated one level at a time.
pub(crate) trait Forcing {
    /// Adds `scale * F^level` to `out`. `cur` holds u at the same level, which lets
    /// explicit nonlinear updates read the current state.
    fn add_scaled(&self, level: usize, scale: f64, cur: &[f64], out: &mut [f64]);

    /// True when F vanishes identically at `level`.
    fn vanishes_at(&self, _level: usize) -> bool {
        false
    }
}

pub(crate) struct NoForcing;

impl Forcing for NoForcing {
    fn add_scaled(&self, _level: usize, _scale: f64, _cur: &[f64], _out: &mut [f64]) {}
    fn vanishes_at(&self, _level: usize) -> bool {
        true
    }
}

/// Receives every computed level in increasing order.
pub(crate) trait LevelSink {
    fn push(&mut self, level: usize, u: &[f64]) -> Result<()>;
}

pub(crate) enum Start<'a> {
    /// Levels 0 and 1 from (ψ₀, ψ₁) with the Taylor start.
    Initial { pos: &'a [f64], vel: &'a [f64] },
    /// u vanishes at `level` and `level + 1`; the caller guarantees that forcing and
    /// boundary data vanish up to those levels.
    Rest { level: usize },
}

pub(crate) fn discrete_laplacian(grid: &Grid, u: &[f64], out: &mut [f64]) {
    let nx = grid.nx();
    let ix2 = 1.0 / (grid.dx_axis(0) * grid.dx_axis(0));
    if grid.dim() == 1 {
        for i in 1..nx - 1 {
            out[i] = ix2 * (u[i - 1] - 2.0 * u[i] + u[i + 1]);
        }
        return;
    }
    let iy2 = 1.0 / (grid.dx_axis(1) * grid.dx_axis(1));
    for j in 1..nx - 1 {
        for i in 1..nx - 1 {
            let k = j * nx + i;
            out[k] = ix2 * (u[k - 1] - 2.0 * u[k] + u[k + 1]) + iy2 * (u[k - nx] - 2.0 * u[k] + u[k + nx]);
        }
    }
}

fn step(grid: &Grid, prev: &[f64], cur: &[f64], next: &mut [f64]) {
    let nx = grid.nx();
    let dt2 = grid.dt() * grid.dt();
    let cx = dt2 / (grid.dx_axis(0) * grid.dx_axis(0));
    if grid.dim() == 1 {
        let n = cur.len();
        let it = next[1..n - 1]
            .iter_mut()
            .zip(&prev[1..n - 1])
            .zip(cur[..n - 2].iter().zip(&cur[1..n - 1]).zip(&cur[2..]));
        for ((o, p), ((l, c), r)) in it {
            *o = 2.0 * c - p + cx * (l - 2.0 * c + r);
        }
        return;
    }
    let cy = dt2 / (grid.dx_axis(1) * grid.dx_axis(1));
    for j in 1..nx - 1 {
        let row = j * nx;
        let c = &cur[row..row + nx];
        let up = &cur[row + nx..row + 2 * nx];
        let dn = &cur[row - nx..row];
        let p = &prev[row..row + nx];
        let o = &mut next[row..row + nx];
        for i in 1..nx - 1 {
            let ci = c[i];
            o[i] = 2.0 * ci - p[i] + cx * (c[i - 1] - 2.0 * ci + c[i + 1]) + cy * (dn[i] - 2.0 * ci + up[i]);
        }
    }
}

fn impose(grid: &Grid, dirichlet: Option<&BoundarySignal>, level: usize, u: &mut [f64]) {
    let b = grid.boundary_nodes();
    match dirichlet {
        Some(f) => {
            let vals = f.level(level);
            for (bn, v) in b.iter().zip(vals) {
                u[bn.node] = *v;
            }
        }
        None => {
            for bn in b {
                u[bn.node] = 0.0;
            }
        }
    }
}

fn check_level(u: &[f64], level: usize) -> Result<()> {
    let s: f64 = u.iter().map(|v| v.abs()).sum();
    if s.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteValue(format!("solution at time level {level}")))
    }
}

fn emit(sinks: &mut [&mut dyn LevelSink], level: usize, u: &[f64]) -> Result<()> {
    for s in sinks.iter_mut() {
        s.push(level, u)?;
    }
    Ok(())
}

/// Marches □u = F to the final level, imposing Dirichlet data on lateral nodes.
pub(crate) fn march(
    grid: &Grid,
    start: Start<'_>,
    forcing: &dyn Forcing,
    dirichlet: Option<&BoundarySignal>,
    sinks: &mut [&mut dyn LevelSink],
) -> Result<()> {
    let nodes = grid.node_count();
    let nt = grid.nt();
    let dt = grid.dt();
    let dt2 = dt * dt;
    let mut prev = vec![0.0; nodes];
    let mut cur = vec![0.0; nodes];
    let mut next = vec![0.0; nodes];
    let first = match start {
        Start::Initial { pos, vel } => {
            prev.copy_from_slice(pos);
            impose(grid, dirichlet, 0, &mut prev);
            let mut lap = vec![0.0; nodes];
            discrete_laplacian(grid, &prev, &mut lap);
            for k in 0..nodes {
                cur[k] = prev[k] + dt * vel[k] + 0.5 * dt2 * lap[k];
            }
            forcing.add_scaled(0, 0.5 * dt2, &prev, &mut cur);
            impose(grid, dirichlet, 1, &mut cur);
            check_level(&cur, 1)?;
            0
        }
        Start::Rest { level } => level,
    };
    emit(sinks, first, &prev)?;
    emit(sinks, first + 1, &cur)?;
    for n in first + 1..nt - 1 {
        step(grid, &prev, &cur, &mut next);
        if !forcing.vanishes_at(n) {
            forcing.add_scaled(n, dt2, &cur, &mut next);
        }
        impose(grid, dirichlet, n + 1, &mut next);
        check_level(&next, n + 1)?;
        emit(sinks, n + 1, &next)?;
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(())
}

/// Collects every level into a flat time-major buffer.
pub(crate) struct FieldRecorder {
    pub values: Vec<f64>,
}

impl FieldRecorder {
    pub fn new(grid: &Grid) -> Self {
        FieldRecorder { values: Vec::with_capacity(grid.sample_count()) }
    }
}

impl LevelSink for FieldRecorder {
    fn push(&mut self, _level: usize, u: &[f64]) -> Result<()> {
        self.values.extend_from_slice(u);
        Ok(())
    }
}
