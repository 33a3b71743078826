//! Linear wave machinery: leapfrog solver for □u = F with Dirichlet data, Neumann traces,
//! and the discrete norms used by the rest of the crate.

pub(crate) mod leapfrog;
mod norms;
mod trace;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{BoundarySignal, FieldRole, SpaceTimeField, SpatialField};
use crate::grid::Grid;

pub(crate) use leapfrog::{march, FieldRecorder, Forcing, LevelSink, NoForcing, Start};
pub use norms::{
    energy_norm, lateral_inner_product, lateral_inner_product_masked, lateral_sobolev_norm, level_energies,
};
pub(crate) use norms::EnergyMeter;
pub(crate) use trace::TraceRecorder;
pub use trace::normal_derivative;

impl Forcing for SpaceTimeField {
    fn add_scaled(&self, level: usize, scale: f64, _cur: &[f64], out: &mut [f64]) {
        for (o, f) in out.iter_mut().zip(self.level(level)) {
            *o += scale * f;
        }
    }
}

/// Solves □u = F on Ω×[0,T] with u = f on Σ and u = ψ₀, ∂ₜu = ψ₁ at t = 0.
pub fn solve_linear_wave(
    grid: &Arc<Grid>,
    source: &SpaceTimeField,
    dirichlet: &BoundarySignal,
    init_pos: &SpatialField,
    init_vel: &SpatialField,
) -> Result<SpaceTimeField> {
    source.check_grid(grid)?;
    dirichlet.check_grid(grid)?;
    init_pos.check_grid(grid)?;
    init_vel.check_grid(grid)?;
    let limit = grid.cfl_safety() * grid.dx_min() / (grid.dim() as f64).sqrt();
    if grid.dt() > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt: grid.dt(), limit, safety: grid.cfl_safety() });
    }
    let scale = 1.0f64.max(dirichlet.max_abs()).max(init_pos.max_abs());
    for (bn, f0) in grid.boundary_nodes().iter().zip(dirichlet.level(0)) {
        let p = init_pos.values()[bn.node];
        if (p - f0).abs() > 1e-12 * scale {
            return Err(Error::Incompatible(format!(
                "Dirichlet value {f0:e} differs from initial position {p:e} at boundary node {}",
                bn.node
            )));
        }
    }
    let mut rec = FieldRecorder::new(grid);
    march(
        grid,
        Start::Initial { pos: init_pos.values(), vel: init_vel.values() },
        source,
        Some(dirichlet),
        &mut [&mut rec],
    )?;
    Ok(SpaceTimeField::from_raw(grid, FieldRole::Solution, rec.values))
}

/// Free wave with Dirichlet data and zero initial state.
pub fn solve_free(grid: &Arc<Grid>, dirichlet: &BoundarySignal) -> Result<SpaceTimeField> {
    dirichlet.check_grid(grid)?;
    let zero = vec![0.0; grid.node_count()];
    let mut rec = FieldRecorder::new(grid);
    march(grid, Start::Initial { pos: &zero, vel: &zero }, &NoForcing, Some(dirichlet), &mut [&mut rec])?;
    Ok(SpaceTimeField::from_raw(grid, FieldRole::Linear, rec.values))
}

/// Zero-data solution of □w = F.
pub fn solve_source(grid: &Arc<Grid>, source: &SpaceTimeField) -> Result<SpaceTimeField> {
    source.check_grid(grid)?;
    let zero = vec![0.0; grid.node_count()];
    let mut rec = FieldRecorder::new(grid);
    march(grid, Start::Initial { pos: &zero, vel: &zero }, source, None, &mut [&mut rec])?;
    Ok(SpaceTimeField::from_raw(grid, FieldRole::Bilinear, rec.values))
}

/// Discrete wave operator (u^{n+1} − 2uⁿ + u^{n−1})/dt² − Δ_h uⁿ at interior levels.
///
/// Lateral nodes use a one-sided second-order second derivative in the normal
/// direction (and the ordinary stencil along the boundary); levels 0 and nt−1 are left zero.
pub fn discrete_wave_operator(u: &SpaceTimeField) -> SpaceTimeField {
    let grid = u.grid();
    let m = grid.node_count();
    let nx = grid.nx();
    let nt = grid.nt();
    let idt2 = 1.0 / (grid.dt() * grid.dt());
    let mut out = vec![0.0; u.values().len()];
    let second = |v: &[f64], k: usize, idx: usize, stride: usize, count: usize, h: f64| -> f64 {
        let at = |i: usize| v[k + i * stride - idx * stride];
        let ih2 = 1.0 / (h * h);
        if idx == 0 {
            (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) * ih2
        } else if idx == count - 1 {
            (2.0 * at(idx) - 5.0 * at(idx - 1) + 4.0 * at(idx - 2) - at(idx - 3)) * ih2
        } else {
            (at(idx - 1) - 2.0 * at(idx) + at(idx + 1)) * ih2
        }
    };
    for n in 1..nt - 1 {
        let (p, c, q) = (u.level(n - 1), u.level(n), u.level(n + 1));
        let o = &mut out[n * m..(n + 1) * m];
        for k in 0..m {
            let utt = (q[k] - 2.0 * c[k] + p[k]) * idt2;
            let lap = if grid.dim() == 1 {
                second(c, k, k, 1, nx, grid.dx())
            } else {
                let (i, j) = (k % nx, k / nx);
                second(c, k, i, 1, nx, grid.dx_axis(0)) + second(c, k, j, nx, nx, grid.dx_axis(1))
            };
            o[k] = utt - lap;
        }
    }
    SpaceTimeField::from_raw(grid, FieldRole::Source, out)
}
