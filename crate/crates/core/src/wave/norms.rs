//! Discrete energy norms on Ω×[0,T] and Sobolev norms on the lateral boundary.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::field::{BoundarySignal, SpaceTimeField};
use crate::grid::Grid;

use super::leapfrog::LevelSink;

/// Second-order gradient along a strided line: centred inside, one-sided at the ends.
fn gradient_line(src: &[f64], dst: &mut [f64], offset: usize, stride: usize, count: usize, h: f64) {
    let at = |i: usize| src[offset + i * stride];
    let inv = 1.0 / (2.0 * h);
    dst[offset] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) * inv;
    for i in 1..count - 1 {
        dst[offset + i * stride] = (at(i + 1) - at(i - 1)) * inv;
    }
    let l = count - 1;
    dst[offset + l * stride] = (3.0 * at(l) - 4.0 * at(l - 1) + at(l - 2)) * inv;
}

/// Spatial gradient of one level along `axis`.
pub(crate) fn spatial_gradient(grid: &Grid, u: &[f64], axis: usize) -> Vec<f64> {
    let nx = grid.nx();
    let h = grid.dx_axis(axis);
    let mut out = vec![0.0; u.len()];
    if grid.dim() == 1 {
        gradient_line(u, &mut out, 0, 1, nx, h);
    } else if axis == 0 {
        for j in 0..nx {
            gradient_line(u, &mut out, j * nx, 1, nx, h);
        }
    } else {
        for i in 0..nx {
            gradient_line(u, &mut out, i, nx, nx, h);
        }
    }
    out
}

fn weighted_sq(u: &[f64], w: &[f64]) -> f64 {
    u.iter().zip(w).map(|(v, w)| w * v * v).sum()
}

/// Squared discrete H^j(Ω) norm of one level: all mixed derivatives of order ≤ j.
pub(crate) fn spatial_sobolev_sq(grid: &Grid, u: &[f64], j: usize, w: &[f64]) -> f64 {
    if grid.dim() == 1 {
        let mut total = weighted_sq(u, w);
        let mut d = u.to_vec();
        for _ in 0..j {
            d = spatial_gradient(grid, &d, 0);
            total += weighted_sq(&d, w);
        }
        return total;
    }
    let mut total = 0.0;
    let mut dx = u.to_vec();
    for a in 0..=j {
        if a > 0 {
            dx = spatial_gradient(grid, &dx, 0);
        }
        let mut d = dx.clone();
        for b in 0..=(j - a) {
            if b > 0 {
                d = spatial_gradient(grid, &d, 1);
            }
            total += weighted_sq(&d, w);
        }
    }
    total
}

fn time_gradient(grid: &Grid, src: &[f64]) -> Vec<f64> {
    let m = grid.node_count();
    let nt = grid.nt();
    let mut out = vec![0.0; src.len()];
    for k in 0..m {
        gradient_line(src, &mut out, k, m, nt, grid.dt());
    }
    out
}

/// sup over levels of Σ_{k ≤ s} ‖∂ₜᵏu(·,t)‖_{H^{s−k}(Ω)}.
pub fn energy_norm(u: &SpaceTimeField, s: usize) -> Result<f64> {
    let grid = u.grid();
    if grid.nt() <= s + 1 || grid.nx() <= s + 1 {
        return Err(Error::OrderTooHigh(format!(
            "energy norm of order {s} needs nt, nx > {} (nt = {}, nx = {})",
            s + 1,
            grid.nt(),
            grid.nx()
        )));
    }
    let w = grid.space_weights();
    let m = grid.node_count();
    let mut derivs: Vec<Vec<f64>> = vec![u.values().to_vec()];
    for k in 1..=s {
        let d = time_gradient(grid, &derivs[k - 1]);
        derivs.push(d);
    }
    let mut sup: f64 = 0.0;
    for n in 0..grid.nt() {
        let mut total = 0.0;
        for (k, d) in derivs.iter().enumerate() {
            total += spatial_sobolev_sq(grid, &d[n * m..(n + 1) * m], s - k, &w).sqrt();
        }
        sup = sup.max(total);
    }
    Ok(sup)
}

/// Energy ‖∂ₜu‖² + ‖∇u‖² at every level (the conserved quantity of the free equation).
pub fn level_energies(u: &SpaceTimeField) -> Vec<f64> {
    let grid = u.grid();
    let w = grid.space_weights();
    let m = grid.node_count();
    let ut = time_gradient(grid, u.values());
    (0..grid.nt())
        .map(|n| {
            let lvl = u.level(n);
            let mut e = weighted_sq(&ut[n * m..(n + 1) * m], &w);
            for axis in 0..grid.dim() {
                e += weighted_sq(&spatial_gradient(grid, lvl, axis), &w);
            }
            e
        })
        .collect()
}

/// Streams the E¹ norm while a solution is being marched.
pub(crate) struct EnergyMeter {
    grid: Arc<Grid>,
    w: Vec<f64>,
    ring: [Vec<f64>; 3],
    seen: usize,
    ut: Vec<f64>,
    sup: f64,
}

impl EnergyMeter {
    pub fn new(grid: &Arc<Grid>) -> Self {
        let m = grid.node_count();
        EnergyMeter {
            grid: grid.clone(),
            w: grid.space_weights(),
            ring: [vec![0.0; m], vec![0.0; m], vec![0.0; m]],
            seen: 0,
            ut: vec![0.0; m],
            sup: 0.0,
        }
    }

    fn eval(&mut self, idx: usize) {
        let v = spatial_sobolev_sq(&self.grid, &self.ring[idx], 1, &self.w).sqrt()
            + weighted_sq(&self.ut, &self.w).sqrt();
        self.sup = self.sup.max(v);
    }

    /// Closes the stream and returns the norm.
    pub fn finish(mut self) -> f64 {
        if self.seen >= 3 {
            let (a, b, c) = ((self.seen - 3) % 3, (self.seen - 2) % 3, (self.seen - 1) % 3);
            let inv = 1.0 / (2.0 * self.grid.dt());
            for k in 0..self.ut.len() {
                self.ut[k] = (3.0 * self.ring[c][k] - 4.0 * self.ring[b][k] + self.ring[a][k]) * inv;
            }
            self.eval(c);
        }
        self.sup
    }
}

impl LevelSink for EnergyMeter {
    fn push(&mut self, _level: usize, u: &[f64]) -> Result<()> {
        let slot = self.seen % 3;
        self.ring[slot].copy_from_slice(u);
        self.seen += 1;
        if self.seen < 3 {
            return Ok(());
        }
        let inv = 1.0 / (2.0 * self.grid.dt());
        let (a, b, c) = ((self.seen - 3) % 3, (self.seen - 2) % 3, (self.seen - 1) % 3);
        if self.seen == 3 {
            for k in 0..self.ut.len() {
                self.ut[k] = (-3.0 * self.ring[a][k] + 4.0 * self.ring[b][k] - self.ring[c][k]) * inv;
            }
            self.eval(a);
        }
        for k in 0..self.ut.len() {
            self.ut[k] = (self.ring[c][k] - self.ring[a][k]) * inv;
        }
        self.eval(b);
        Ok(())
    }
}

/// Discrete H^γ norm in time of every lateral node, combined with the surface measure.
///
/// Each node's series is zero-extended, transformed, and weighted by (1+ξ²)^γ. The
/// end samples carry a 1/√2 factor so that γ = 0 reproduces the trapezoid rule.
pub fn lateral_sobolev_norm(g: &BoundarySignal, gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {gamma}")));
    }
    let grid = g.grid();
    let nt = grid.nt();
    let dt = grid.dt();
    let npad = (2 * nt).next_power_of_two();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(npad);
    let mult: Vec<f64> = (0..npad)
        .map(|k| {
            let kk = if k <= npad / 2 { k as f64 } else { k as f64 - npad as f64 };
            let xi = 2.0 * PI * kk / (npad as f64 * dt);
            (1.0 + xi * xi).powf(gamma)
        })
        .collect();
    let end = std::f64::consts::FRAC_1_SQRT_2;
    let mut buf = vec![Complex64::new(0.0, 0.0); npad];
    let mut total = 0.0;
    for (b, bn) in grid.boundary_nodes().iter().enumerate() {
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for n in 0..nt {
            let scale = if n == 0 || n == nt - 1 { end } else { 1.0 };
            buf[n].re = scale * g.at(n, b);
        }
        fft.process(&mut buf);
        let acc: f64 = buf.iter().zip(&mult).map(|(c, m)| m * c.norm_sqr()).sum();
        total += bn.weight * acc * dt / npad as f64;
    }
    Ok(total.sqrt())
}

/// Trapezoid L²(Σ) pairing.
pub fn lateral_inner_product(g: &BoundarySignal, h: &BoundarySignal) -> Result<f64> {
    h.check_grid(g.grid())?;
    let grid = g.grid();
    let wt = grid.time_weights();
    let nb = grid.boundary_count();
    let wb: Vec<f64> = grid.boundary_nodes().iter().map(|b| b.weight).collect();
    let (gv, hv) = (g.values(), h.values());
    let mut total = 0.0;
    for (n, w) in wt.iter().enumerate() {
        let mut s = 0.0;
        for b in 0..nb {
            s += wb[b] * gv[n * nb + b] * hv[n * nb + b];
        }
        total += w * s;
    }
    Ok(total)
}

/// Same pairing restricted to the samples flagged in `mask` (time-major, like the signals).
pub fn lateral_inner_product_masked(g: &BoundarySignal, h: &BoundarySignal, mask: &[bool]) -> Result<f64> {
    h.check_grid(g.grid())?;
    let grid = g.grid();
    let nb = grid.boundary_count();
    if mask.len() != nb * grid.nt() {
        return Err(Error::SizeMismatch { expected: nb * grid.nt(), got: mask.len() });
    }
    let wt = grid.time_weights();
    let wb: Vec<f64> = grid.boundary_nodes().iter().map(|b| b.weight).collect();
    let (gv, hv) = (g.values(), h.values());
    let mut total = 0.0;
    for (n, w) in wt.iter().enumerate() {
        let mut s = 0.0;
        for b in 0..nb {
            let k = n * nb + b;
            if mask[k] {
                s += wb[b] * gv[k] * hv[k];
            }
        }
        total += w * s;
    }
    Ok(total)
}
