//! Fixed-point iteration u_{k+1} = S(−a u_kᵐ, f) for □u + a uᵐ = 0.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BoundarySignal, FieldRole, SpaceTimeField, SpatialField};
use crate::grid::Grid;
use crate::wave::{
    energy_norm, lateral_sobolev_norm, march, solve_linear_wave, EnergyMeter, FieldRecorder, Forcing, LevelSink,
    NoForcing, Start, TraceRecorder,
};

use super::potential::{IndexBox, Potential};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Largest ratio of consecutive residuals.
    pub contraction_ratio: f64,
}

impl PicardReport {
    fn from_history(history: Vec<f64>, converged: bool) -> Self {
        let contraction_ratio = history
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .fold(0.0, f64::max);
        PicardReport { iterations: history.len(), residual_history: history, converged, contraction_ratio }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardSettings {
    /// Stopping tolerance relative to ‖f‖_{L²(Σ)}.
    pub tol_rel: f64,
    pub max_iter: usize,
}

impl Default for PicardSettings {
    fn default() -> Self {
        PicardSettings { tol_rel: 1e-10, max_iter: 60 }
    }
}

impl PicardSettings {
    pub fn tolerance(&self, f: &BoundarySignal) -> Result<f64> {
        let norm = lateral_sobolev_norm(f, 0.0)?;
        Ok((self.tol_rel * norm).max(f64::MIN_POSITIVE))
    }
}

/// Decides whether to stop after a new residual. Ok(true) means converged.
fn judge(history: &[f64], tol: f64, max_iter: usize) -> Result<bool> {
    let k = history.len();
    let r = history[k - 1];
    if !r.is_finite() {
        return Err(Error::NonContraction(format!("residual became non-finite at iteration {k}")));
    }
    if r <= tol {
        return Ok(true);
    }
    if k >= 2 && r >= history[k - 2] {
        return Err(Error::NonContraction(format!(
            "residual grew from {:.3e} to {r:.3e} at iteration {k}; the data exceed the contraction regime",
            history[k - 2]
        )));
    }
    if k >= max_iter {
        return Err(Error::NonContraction(format!("no convergence to {tol:.3e} within {max_iter} iterations")));
    }
    Ok(false)
}

/// −a·uᵐ as a full space-time field.
pub fn nonlinear_source(a: &Potential, u: &SpaceTimeField) -> SpaceTimeField {
    power_source(a, u, a.m() as i32)
}

/// −a·u, e.g. for □w + a v₁⋯v_m = 0 with u = v₁⋯v_m.
pub fn product_source(a: &Potential, u: &SpaceTimeField) -> SpaceTimeField {
    power_source(a, u, 1)
}

fn power_source(a: &Potential, u: &SpaceTimeField, p: i32) -> SpaceTimeField {
    let g = u.grid();
    let m = g.node_count();
    let mut out = vec![0.0; g.sample_count()];
    let b = a.support();
    for n in b.n0..b.n1 {
        let av = a.level_box(n);
        let lvl = u.level(n);
        for (k, node) in b.nodes(g.nx()).enumerate() {
            out[n * m + node] = -(av[k] * lvl[node].powi(p));
        }
    }
    SpaceTimeField::from_raw(g, FieldRole::Source, out)
}

/// Literal Picard iteration on stored space-time fields.
pub fn solve_semilinear(
    grid: &Arc<Grid>,
    a: &Potential,
    dirichlet: &BoundarySignal,
    tol: f64,
    max_iter: usize,
) -> Result<(SpaceTimeField, PicardReport)> {
    dirichlet.check_grid(grid)?;
    if a.grid().as_ref() != grid.as_ref() {
        return Err(Error::ShapeMismatch("potential lives on a different grid".into()));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidParameter("tol > 0 and max_iter >= 1 required".into()));
    }
    let zero = SpatialField::zeros(grid);
    let mut u = SpaceTimeField::zeros(grid, FieldRole::Solution);
    let mut history = Vec::new();
    loop {
        let src = nonlinear_source(a, &u);
        let next = solve_linear_wave(grid, &src, dirichlet, &zero, &zero)?;
        let res = energy_norm(&next.axpy(-1.0, &u)?, 1)?;
        history.push(res);
        u = next;
        if judge(&history, tol, max_iter)? {
            return Ok((u, PicardReport::from_history(history, true)));
        }
    }
}

/// Forcing supported on the potential's index box.
struct BoxForcing<'a> {
    support: IndexBox,
    nx: usize,
    values: &'a [f64],
}

impl Forcing for BoxForcing<'_> {
    fn add_scaled(&self, level: usize, scale: f64, _cur: &[f64], out: &mut [f64]) {
        if !self.support.contains_level(level) {
            return;
        }
        let ls = self.support.level_size();
        let vals = &self.values[(level - self.support.n0) * ls..(level - self.support.n0 + 1) * ls];
        for (v, node) in vals.iter().zip(self.support.nodes(self.nx)) {
            out[node] += scale * v;
        }
    }
    fn vanishes_at(&self, level: usize) -> bool {
        !self.support.contains_level(level)
    }
}

/// Records the solution on the potential's index box.
struct BoxRecorder {
    support: IndexBox,
    nx: usize,
    values: Vec<f64>,
}

impl BoxRecorder {
    fn new(support: IndexBox, nx: usize) -> Self {
        BoxRecorder { support, nx, values: vec![0.0; support.len()] }
    }
}

impl LevelSink for BoxRecorder {
    fn push(&mut self, level: usize, u: &[f64]) -> Result<()> {
        if self.support.contains_level(level) {
            let ls = self.support.level_size();
            let off = (level - self.support.n0) * ls;
            for (k, node) in self.support.nodes(self.nx).enumerate() {
                self.values[off + k] = u[node];
            }
        }
        Ok(())
    }
}

pub(crate) struct WindowedOutcome {
    pub trace: BoundarySignal,
    pub report: PicardReport,
}

/// Picard iteration in difference form, keeping only what the DN map needs.
///
/// After the first (full) linear solve each iterate adds d = S(−a(u_kᵐ − u_{k−1}ᵐ)) with zero
/// data. The source lives on the support box of a, so d vanishes before that box starts and
/// the march begins there. The Neumann trace, the box values of u and the E¹ norm of d are
/// accumulated on the fly; no space-time field is stored.
pub(crate) fn picard_windowed(
    grid: &Arc<Grid>,
    a: &Potential,
    f: &BoundarySignal,
    tol: f64,
    max_iter: usize,
) -> Result<WindowedOutcome> {
    f.check_grid(grid)?;
    if a.grid().as_ref() != grid.as_ref() {
        return Err(Error::ShapeMismatch("potential lives on a different grid".into()));
    }
    if f.is_zero() {
        return Ok(WindowedOutcome {
            trace: BoundarySignal::zeros(grid, crate::field::SignalRole::Neumann),
            report: PicardReport::from_history(vec![0.0], true),
        });
    }
    let support = a.support();
    let nx = grid.nx();
    let zero = vec![0.0; grid.node_count()];

    let mut trace = TraceRecorder::new(grid);
    let mut boxrec = BoxRecorder::new(support, nx);
    let mut meter = EnergyMeter::new(grid);
    march(grid, Start::Initial { pos: &zero, vel: &zero }, &NoForcing, Some(f), &mut [&mut trace, &mut boxrec, &mut meter])?;
    let mut history = vec![meter.finish()];
    let mut trace_values = trace.values;
    let mut u_box = boxrec.values;
    if judge(&history, tol, max_iter)? {
        return Ok(finish(grid, trace_values, history));
    }
    if support.is_empty() {
        history.push(0.0);
        return Ok(finish(grid, trace_values, history));
    }

    let p = a.m() as i32;
    let a_box = a.box_values();
    let mut f_prev = vec![0.0; support.len()];
    let mut d_f = vec![0.0; support.len()];
    loop {
        for k in 0..support.len() {
            let fk = -(a_box[k] * u_box[k].powi(p));
            d_f[k] = fk - f_prev[k];
            f_prev[k] = fk;
        }
        let forcing = BoxForcing { support, nx, values: &d_f };
        let mut trace = TraceRecorder::new(grid);
        let mut boxrec = BoxRecorder::new(support, nx);
        let mut meter = EnergyMeter::new(grid);
        let start_level = support.n0.saturating_sub(2);
        let start = if start_level == 0 { Start::Initial { pos: &zero, vel: &zero } } else { Start::Rest { level: start_level } };
        march(grid, start, &forcing, None, &mut [&mut trace, &mut boxrec, &mut meter])?;
        history.push(meter.finish());
        for (t, d) in trace_values.iter_mut().zip(&trace.values) {
            *t += d;
        }
        for (u, d) in u_box.iter_mut().zip(&boxrec.values) {
            *u += d;
        }
        if judge(&history, tol, max_iter)? {
            return Ok(finish(grid, trace_values, history));
        }
    }
}

fn finish(grid: &Arc<Grid>, trace: Vec<f64>, history: Vec<f64>) -> WindowedOutcome {
    WindowedOutcome {
        trace: BoundarySignal::from_raw(grid, crate::field::SignalRole::Neumann, trace),
        report: PicardReport::from_history(history, true),
    }
}

/// Time-explicit nonlinear leapfrog: the source −a(uⁿ)ᵐ uses the current level.
///
/// The Picard fixed point of the discrete scheme satisfies the same recursion, so the two
/// agree up to the Picard tolerance; this path exists only as a cross-check.
pub fn solve_semilinear_explicit(grid: &Arc<Grid>, a: &Potential, dirichlet: &BoundarySignal) -> Result<SpaceTimeField> {
    struct Explicit<'a> {
        a: &'a Potential,
        nx: usize,
    }
    impl Forcing for Explicit<'_> {
        fn add_scaled(&self, level: usize, scale: f64, cur: &[f64], out: &mut [f64]) {
            let b = self.a.support();
            let av = self.a.level_box(level);
            if av.is_empty() {
                return;
            }
            let p = self.a.m() as i32;
            for (k, node) in b.nodes(self.nx).enumerate() {
                out[node] += scale * (-(av[k] * cur[node].powi(p)));
            }
        }
        fn vanishes_at(&self, level: usize) -> bool {
            !self.a.support().contains_level(level)
        }
    }
    dirichlet.check_grid(grid)?;
    let zero = vec![0.0; grid.node_count()];
    let mut rec = FieldRecorder::new(grid);
    march(
        grid,
        Start::Initial { pos: &zero, vel: &zero },
        &Explicit { a, nx: grid.nx() },
        Some(dirichlet),
        &mut [&mut rec],
    )?;
    Ok(SpaceTimeField::from_raw(grid, FieldRole::Solution, rec.values))
}
