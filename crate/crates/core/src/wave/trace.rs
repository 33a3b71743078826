//! Outward normal derivatives on the lateral boundary.

use std::sync::Arc;

use crate::error::Result;
use crate::field::{BoundarySignal, SignalRole, SpaceTimeField};
use crate::grid::Grid;

use super::leapfrog::LevelSink;

/// One-sided second-order outward derivative along `axis` at an end of the axis.
#[inline]
fn outward(u0: f64, u1: f64, u2: f64, h: f64) -> f64 {
    // u0 on the boundary, u1, u2 stepping inward
    (3.0 * u0 - 4.0 * u1 + u2) / (2.0 * h)
}

/// Writes ∂_ν u at every lateral node for one time level.
pub(crate) fn normal_derivative_level(grid: &Grid, u: &[f64], out: &mut [f64]) {
    let nx = grid.nx();
    if grid.dim() == 1 {
        let h = grid.dx();
        let last = nx - 1;
        out[0] = outward(u[0], u[1], u[2], h);
        out[1] = outward(u[last], u[last - 1], u[last - 2], h);
        return;
    }
    let (hx, hy) = (grid.dx_axis(0), grid.dx_axis(1));
    for (o, bn) in out.iter_mut().zip(grid.boundary_nodes()) {
        let [i, j] = bn.ij;
        let k = bn.node;
        let mut d = 0.0;
        if bn.normal[0] != 0.0 {
            let dx = if i == 0 {
                outward(u[k], u[k + 1], u[k + 2], hx)
            } else {
                outward(u[k], u[k - 1], u[k - 2], hx)
            };
            d += bn.normal[0].abs() * dx;
        }
        if bn.normal[1] != 0.0 {
            let dy = if j == 0 {
                outward(u[k], u[k + nx], u[k + 2 * nx], hy)
            } else {
                outward(u[k], u[k - nx], u[k - 2 * nx], hy)
            };
            d += bn.normal[1].abs() * dy;
        }
        *o = d;
    }
}

/// Outward normal derivative of a stored field at every lateral node and level.
pub fn normal_derivative(u: &SpaceTimeField) -> Result<BoundarySignal> {
    let grid = u.grid();
    let nb = grid.boundary_count();
    let mut values = vec![0.0; nb * grid.nt()];
    for n in 0..grid.nt() {
        normal_derivative_level(grid, u.level(n), &mut values[n * nb..(n + 1) * nb]);
    }
    Ok(BoundarySignal::from_raw(grid, SignalRole::Neumann, values))
}

/// Sink that records the Neumann trace while marching.
pub(crate) struct TraceRecorder {
    nb: usize,
    grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl TraceRecorder {
    pub fn new(grid: &Arc<Grid>) -> Self {
        let nb = grid.boundary_count();
        TraceRecorder { nb, grid: grid.clone(), values: vec![0.0; nb * grid.nt()] }
    }
}

impl LevelSink for TraceRecorder {
    fn push(&mut self, level: usize, u: &[f64]) -> Result<()> {
        let nb = self.nb;
        normal_derivative_level(&self.grid, u, &mut self.values[level * nb..(level + 1) * nb]);
        Ok(())
    }
}
