//! Admissible potentials a(x,t), stored only on the index box that contains their support.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldRole, SpaceTimeField, SpatialField};
use crate::grid::Grid;

/// Geometry of the admissible time window: d, λ and t₁ = d+λ, t₂ = T−d−λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleWindow {
    pub d: f64,
    pub lam: f64,
    pub t1: f64,
    pub t2: f64,
}

impl AdmissibleWindow {
    pub fn new(grid: &Grid, lam: f64) -> Result<Self> {
        if !(lam > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lam}")));
        }
        let d = grid.diameter();
        let t = grid.final_time();
        if t < 2.0 * d + 2.0 * lam {
            return Err(Error::GeometryViolation(format!(
                "T = {t} is below 2d + 2λ = {} (d = {d}, λ = {lam})",
                2.0 * d + 2.0 * lam
            )));
        }
        Ok(AdmissibleWindow { d, lam, t1: d + lam, t2: t - d - lam })
    }

    /// λ = 0.05·T.
    pub fn with_default_lambda(grid: &Grid) -> Result<Self> {
        Self::new(grid, 0.05 * grid.final_time())
    }

    pub fn contains_time(&self, t: f64) -> bool {
        t >= self.t1 && t <= self.t2
    }
}

/// Half-open index ranges [n0,n1) × [j0,j1) × [i0,i1) of levels, rows and columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexBox {
    pub n0: usize,
    pub n1: usize,
    pub j0: usize,
    pub j1: usize,
    pub i0: usize,
    pub i1: usize,
}

impl IndexBox {
    pub fn is_empty(&self) -> bool {
        self.n0 >= self.n1 || self.j0 >= self.j1 || self.i0 >= self.i1
    }
    pub fn width(&self) -> usize {
        self.i1 - self.i0
    }
    pub fn rows(&self) -> usize {
        self.j1 - self.j0
    }
    pub fn levels(&self) -> usize {
        self.n1 - self.n0
    }
    pub fn level_size(&self) -> usize {
        self.width() * self.rows()
    }
    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            self.levels() * self.level_size()
        }
    }
    pub fn contains_level(&self, n: usize) -> bool {
        n >= self.n0 && n < self.n1
    }

    /// Spatial node indices of one box level, in storage order.
    pub fn nodes(&self, nx: usize) -> impl Iterator<Item = usize> + '_ {
        (self.j0..self.j1).flat_map(move |j| (self.i0..self.i1).map(move |i| j * nx + i))
    }
}

/// Classical C^∞ bump exp(1 − 1/(1−ρ²)) on |ρ| < 1, equal to 1 at the origin.
pub fn unit_bump(rho: f64) -> f64 {
    let r2 = rho * rho;
    if r2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r2)).exp()
    }
}

#[derive(Debug, Clone)]
pub struct Potential {
    grid: Arc<Grid>,
    m: u32,
    bound: f64,
    window: AdmissibleWindow,
    support: IndexBox,
    values: Vec<f64>,
}

/// Physical region that is known to contain the support: ([x0,x1], [y0,y1], [t0,t1]).
#[derive(Debug, Clone, Copy)]
pub struct SupportHint {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub t: [f64; 2],
}

impl Potential {
    /// Samples `f(x, y, t)` inside `hint` (or everywhere) and certifies admissibility.
    ///
    /// `bound` is the certificate L; when absent the discrete C¹ norm of the samples is used.
    pub fn from_fn(
        grid: &Arc<Grid>,
        m: u32,
        window: AdmissibleWindow,
        hint: Option<SupportHint>,
        bound: Option<f64>,
        f: impl Fn(f64, f64, f64) -> f64,
    ) -> Result<Potential> {
        if m < 2 {
            return Err(Error::InvalidParameter(format!("power m must be >= 2, got {m}")));
        }
        let nx = grid.nx();
        let range = |lo: f64, hi: f64, axis: usize| -> (usize, usize) {
            let h = grid.dx_axis(axis);
            let a = ((lo - grid.lower(axis)) / h).floor().max(0.0) as usize;
            let b = (((hi - grid.lower(axis)) / h).ceil() as usize + 1).min(nx);
            (a.min(nx), b)
        };
        let (i0, i1, j0, j1, n0, n1) = match hint {
            Some(h) => {
                let (i0, i1) = range(h.x[0], h.x[1], 0);
                let (j0, j1) = if grid.dim() == 2 { range(h.y[0], h.y[1], 1) } else { (0, 1) };
                let n0 = ((h.t[0] / grid.dt()).floor().max(0.0) as usize).min(grid.nt());
                let n1 = ((h.t[1] / grid.dt()).ceil() as usize + 1).min(grid.nt());
                (i0, i1, j0, j1, n0, n1)
            }
            None => (0, nx, 0, if grid.dim() == 2 { nx } else { 1 }, 0, grid.nt()),
        };
        // first pass: samples in the hint box, tracking the tight support
        let (mut ti0, mut ti1, mut tj0, mut tj1, mut tn0, mut tn1) = (usize::MAX, 0, usize::MAX, 0, usize::MAX, 0);
        let mut samples = Vec::with_capacity((i1 - i0) * (j1 - j0) * (n1.saturating_sub(n0)));
        for n in n0..n1 {
            let t = grid.time(n);
            for j in j0..j1 {
                let y = if grid.dim() == 2 { grid.coord(1, j) } else { 0.0 };
                for i in i0..i1 {
                    let v = f(grid.coord(0, i), y, t);
                    if !v.is_finite() {
                        return Err(Error::NonFiniteValue("potential sample".into()));
                    }
                    if v != 0.0 {
                        ti0 = ti0.min(i);
                        ti1 = ti1.max(i + 1);
                        tj0 = tj0.min(j);
                        tj1 = tj1.max(j + 1);
                        tn0 = tn0.min(n);
                        tn1 = tn1.max(n + 1);
                    }
                    samples.push(v);
                }
            }
        }
        let support = if tn0 == usize::MAX {
            IndexBox { n0: 0, n1: 0, j0: 0, j1: 0, i0: 0, i1: 0 }
        } else {
            IndexBox { n0: tn0, n1: tn1, j0: tj0, j1: tj1, i0: ti0, i1: ti1 }
        };
        let mut values = Vec::with_capacity(support.len());
        if !support.is_empty() {
            let (w, r) = (i1 - i0, j1 - j0);
            for n in support.n0..support.n1 {
                for j in support.j0..support.j1 {
                    let base = ((n - n0) * r + (j - j0)) * w;
                    values.extend_from_slice(&samples[base + support.i0 - i0..base + support.i1 - i0]);
                }
            }
        }
        let mut pot = Potential { grid: grid.clone(), m, bound: 0.0, window, support, values };
        pot.check_support()?;
        let cert = pot.c1_norm();
        pot.bound = match bound {
            Some(l) => {
                let maxa = pot.max_abs();
                if maxa > l {
                    return Err(Error::InvalidParameter(format!("max |a| = {maxa} exceeds the bound L = {l}")));
                }
                l
            }
            None => cert,
        };
        Ok(pot)
    }

    pub fn zero(grid: &Arc<Grid>, m: u32, window: AdmissibleWindow) -> Result<Potential> {
        Potential::from_fn(grid, m, window, Some(SupportHint { x: [0.0; 2], y: [0.0; 2], t: [0.0; 2] }), Some(0.0), |_, _, _| 0.0)
    }

    /// A·b(|x−c|/r_x)·b((t−t_c)/r_t) with b the unit bump.
    pub fn bump(
        grid: &Arc<Grid>,
        m: u32,
        window: AdmissibleWindow,
        amplitude: f64,
        center: [f64; 2],
        radius_x: f64,
        t_center: f64,
        radius_t: f64,
    ) -> Result<Potential> {
        if !(radius_x > 0.0 && radius_t > 0.0) {
            return Err(Error::InvalidParameter("bump radii must be positive".into()));
        }
        let two_d = grid.dim() == 2;
        let hint = SupportHint {
            x: [center[0] - radius_x, center[0] + radius_x],
            y: [center[1] - radius_x, center[1] + radius_x],
            t: [t_center - radius_t, t_center + radius_t],
        };
        Potential::from_fn(grid, m, window, Some(hint), None, move |x, y, t| {
            let r = if two_d { ((x - center[0]).powi(2) + (y - center[1]).powi(2)).sqrt() } else { (x - center[0]).abs() };
            amplitude * unit_bump(r / radius_x) * unit_bump((t - t_center) / radius_t)
        })
    }

    /// Smooth cone: A·b(ρ/R)·exp(−(√(h²+ρ²) − h)/ℓ), ρ the space-time distance to the apex.
    ///
    /// The core radius h ≪ ℓ rounds the apex, so the profile is C^∞ while its gradient is
    /// of size A/ℓ right next to the apex; Gaussian averages then converge like τ^{−1/2}.
    #[allow(clippy::too_many_arguments)]
    pub fn peaked(
        grid: &Arc<Grid>,
        m: u32,
        window: AdmissibleWindow,
        amplitude: f64,
        center: [f64; 2],
        t_center: f64,
        radius: f64,
        length: f64,
        core: f64,
    ) -> Result<Potential> {
        if !(radius > 0.0 && length > 0.0 && core > 0.0) {
            return Err(Error::InvalidParameter("peaked profile needs positive radius, length and core".into()));
        }
        let two_d = grid.dim() == 2;
        let hint = SupportHint {
            x: [center[0] - radius, center[0] + radius],
            y: [center[1] - radius, center[1] + radius],
            t: [t_center - radius, t_center + radius],
        };
        Potential::from_fn(grid, m, window, Some(hint), None, move |x, y, t| {
            let dy = if two_d { y - center[1] } else { 0.0 };
            let rho = ((x - center[0]).powi(2) + dy * dy + (t - t_center).powi(2)).sqrt();
            amplitude * unit_bump(rho / radius) * (-((core * core + rho * rho).sqrt() - core) / length).exp()
        })
    }

    fn check_support(&self) -> Result<()> {
        if self.support.is_empty() {
            return Ok(());
        }
        let g = &*self.grid;
        let b = &self.support;
        let last = g.nx() - 1;
        let touches_space = b.i0 == 0 || b.i1 - 1 == last || (g.dim() == 2 && (b.j0 == 0 || b.j1 - 1 == last));
        if touches_space {
            return Err(Error::GeometryViolation("potential support reaches the lateral boundary".into()));
        }
        let (ta, tb) = (g.time(b.n0), g.time(b.n1 - 1));
        if !(ta > self.window.t1 && tb < self.window.t2) {
            return Err(Error::GeometryViolation(format!(
                "potential support in time [{ta:.4}, {tb:.4}] is not inside ({:.4}, {:.4})",
                self.window.t1, self.window.t2
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn m(&self) -> u32 {
        self.m
    }
    pub fn bound(&self) -> f64 {
        self.bound
    }
    pub fn window(&self) -> AdmissibleWindow {
        self.window
    }
    pub fn support(&self) -> IndexBox {
        self.support
    }
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
    pub fn box_values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max|a| + max|∇_{x,t} a| over the samples (one-sided differences).
    pub fn c1_norm(&self) -> f64 {
        let b = self.support;
        if b.is_empty() {
            return 0.0;
        }
        let (w, r, ls) = (b.width(), b.rows(), b.level_size());
        let g = &*self.grid;
        let mut grad: f64 = 0.0;
        for n in 0..b.levels() {
            for j in 0..r {
                for i in 0..w {
                    let k = n * ls + j * w + i;
                    let v = self.values[k];
                    let mut s = 0.0;
                    if i + 1 < w {
                        s += ((self.values[k + 1] - v) / g.dx_axis(0)).powi(2);
                    }
                    if g.dim() == 2 && j + 1 < r {
                        s += ((self.values[k + w] - v) / g.dx_axis(1)).powi(2);
                    }
                    if n + 1 < b.levels() {
                        s += ((self.values[k + ls] - v) / g.dt()).powi(2);
                    }
                    grad = grad.max(s.sqrt());
                }
            }
        }
        self.max_abs() + grad
    }

    /// a at (level, node); zero outside the support box.
    pub fn value(&self, level: usize, node: usize) -> f64 {
        let b = &self.support;
        if !b.contains_level(level) {
            return 0.0;
        }
        let nx = self.grid.nx();
        let (i, j) = if self.grid.dim() == 1 { (node, 0) } else { (node % nx, node / nx) };
        if i < b.i0 || i >= b.i1 || j < b.j0 || j >= b.j1 {
            return 0.0;
        }
        self.values[(level - b.n0) * b.level_size() + (j - b.j0) * b.width() + (i - b.i0)]
    }

    /// Box values of one level (empty when the level is outside the box).
    pub fn level_box(&self, level: usize) -> &[f64] {
        let b = &self.support;
        if !b.contains_level(level) {
            return &[];
        }
        let ls = b.level_size();
        &self.values[(level - b.n0) * ls..(level - b.n0 + 1) * ls]
    }

    pub fn to_field(&self) -> SpaceTimeField {
        let g = &self.grid;
        let mut out = vec![0.0; g.sample_count()];
        let b = self.support;
        let m = g.node_count();
        for n in b.n0..b.n1 {
            for (k, node) in b.nodes(g.nx()).enumerate() {
                out[n * m + node] = self.level_box(n)[k];
            }
        }
        SpaceTimeField::from_raw(g, FieldRole::Auxiliary, out)
    }

    /// Spatial slice at time t, linear in time between levels.
    pub fn slice_at(&self, t: f64) -> SpatialField {
        let g = &self.grid;
        let mut out = SpatialField::zeros(g);
        let s = (t / g.dt()).clamp(0.0, (g.nt() - 1) as f64);
        let n = (s.floor() as usize).min(g.nt() - 2);
        let w = s - n as f64;
        let b = self.support;
        let vals = out.values_mut();
        for (k, node) in b.nodes(g.nx()).enumerate() {
            let lo = self.level_box(n).get(k).copied().unwrap_or(0.0);
            let hi = self.level_box(n + 1).get(k).copied().unwrap_or(0.0);
            vals[node] = (1.0 - w) * lo + w * hi;
        }
        out
    }

    /// Same potential with every value multiplied by c (certificate scaled accordingly).
    pub fn scaled(&self, c: f64) -> Potential {
        let mut p = self.clone();
        p.values.iter_mut().for_each(|v| *v *= c);
        p.bound *= c.abs();
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn grid() -> Arc<Grid> {
        Arc::new(GridSpec::interval(1.0, 3.5, 101, 401).build().unwrap())
    }

    #[test]
    fn window_matches_definition() {
        let g = grid();
        let w = AdmissibleWindow::with_default_lambda(&g).unwrap();
        assert!((w.lam - 0.175).abs() < 1e-15);
        assert!((w.t1 - 1.175).abs() < 1e-12 && (w.t2 - 2.325).abs() < 1e-12);
        let short = Arc::new(GridSpec::interval(1.0, 2.0, 101, 401).build().unwrap());
        assert!(matches!(AdmissibleWindow::with_default_lambda(&short), Err(Error::GeometryViolation(_))));
    }

    #[test]
    fn bump_support_and_values() {
        let g = grid();
        let w = AdmissibleWindow::with_default_lambda(&g).unwrap();
        let a = Potential::bump(&g, 2, w, 0.5, [0.5, 0.0], 0.3, 1.75, 0.4).unwrap();
        let n = g.level_of(1.75);
        assert!((a.value(n, 50) - 0.5).abs() < 1e-12);
        assert_eq!(a.value(n, 10), 0.0);
        assert!(a.max_abs() <= a.bound());
        let f = a.to_field();
        assert!((f.at(n, 50) - 0.5).abs() < 1e-12);
        let s = a.slice_at(1.75);
        assert!((s.values()[50] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn inadmissible_support_rejected() {
        let g = grid();
        let w = AdmissibleWindow::with_default_lambda(&g).unwrap();
        assert!(Potential::bump(&g, 2, w, 1.0, [0.5, 0.0], 0.3, 1.2, 0.4).is_err());
        assert!(Potential::bump(&g, 2, w, 1.0, [0.1, 0.0], 0.3, 1.75, 0.4).is_err());
        let full = Potential::from_fn(&g, 2, w, None, None, |_, _, t| if t > 1.5 && t < 2.0 { 1.0 } else { 0.0 });
        assert!(full.is_err());
    }
}
