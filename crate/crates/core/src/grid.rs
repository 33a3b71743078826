//! Space-time grid for a box domain Ω ⊂ ℝⁿ (n = 1, 2) and the time interval [0, T].
//!
//! Spatial nodes are numbered with the first axis fastest: node `j * nx + i` sits at
//! `(lower[0] + i*dx[0], lower[1] + j*dx[1])`. Lateral boundary nodes are listed
//! counter-clockwise starting at the lower-left corner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CFL_SAFETY: f64 = 0.9;

/// Plain description of a grid, suitable for configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    /// Lower corner of the box; defaults to the origin.
    #[serde(default)]
    pub lower: Vec<f64>,
    pub extents: Vec<f64>,
    pub final_time: f64,
    pub nx: usize,
    pub nt: usize,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
}

fn default_cfl() -> f64 {
    DEFAULT_CFL_SAFETY
}

impl GridSpec {
    pub fn interval(length: f64, final_time: f64, nx: usize, nt: usize) -> Self {
        GridSpec {
            n: 1,
            lower: vec![0.0],
            extents: vec![length],
            final_time,
            nx,
            nt,
            cfl_safety: DEFAULT_CFL_SAFETY,
        }
    }

    pub fn square(side: f64, final_time: f64, nx: usize, nt: usize) -> Self {
        GridSpec {
            n: 2,
            lower: vec![0.0, 0.0],
            extents: vec![side, side],
            final_time,
            nx,
            nt,
            cfl_safety: DEFAULT_CFL_SAFETY,
        }
    }

    pub fn with_lower(mut self, lower: &[f64]) -> Self {
        self.lower = lower.to_vec();
        self
    }

    pub fn build(&self) -> Result<Grid> {
        Grid::new(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    /// Index into the spatial node array.
    pub node: usize,
    /// Grid indices (i, j); j = 0 in 1D.
    pub ij: [usize; 2],
    /// Outward unit normal (diagonal at corners).
    pub normal: [f64; 2],
    /// Surface measure attached to the node (1 in 1D, arc length in 2D).
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct Grid {
    n: usize,
    lower: [f64; 2],
    extents: [f64; 2],
    final_time: f64,
    nx: usize,
    nt: usize,
    dx: [f64; 2],
    dt: f64,
    cfl_safety: f64,
    boundary: Vec<BoundaryNode>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.lower == other.lower
            && self.extents == other.extents
            && self.final_time == other.final_time
            && self.nx == other.nx
            && self.nt == other.nt
    }
}

impl Grid {
    pub fn new(spec: &GridSpec) -> Result<Grid> {
        let n = spec.n;
        if n != 1 && n != 2 {
            return Err(Error::DimensionUnsupported(n));
        }
        if spec.extents.len() != n {
            return Err(Error::SizeMismatch { expected: n, got: spec.extents.len() });
        }
        if !spec.lower.is_empty() && spec.lower.len() != n {
            return Err(Error::SizeMismatch { expected: n, got: spec.lower.len() });
        }
        if spec.nx < 3 || spec.nt < 3 {
            return Err(Error::InvalidParameter(format!(
                "nx >= 3 and nt >= 3 required (nx = {}, nt = {})",
                spec.nx, spec.nt
            )));
        }
        if !(spec.cfl_safety > 0.0 && spec.cfl_safety <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cfl_safety must lie in (0, 1], got {}",
                spec.cfl_safety
            )));
        }
        if !(spec.final_time > 0.0 && spec.final_time.is_finite()) {
            return Err(Error::InvalidParameter(format!("T must be positive, got {}", spec.final_time)));
        }
        let mut lower = [0.0; 2];
        let mut extents = [0.0; 2];
        let mut dx = [0.0; 2];
        for a in 0..n {
            let e = spec.extents[a];
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidParameter(format!("extent {a} must be positive, got {e}")));
            }
            extents[a] = e;
            lower[a] = spec.lower.get(a).copied().unwrap_or(0.0);
            dx[a] = e / (spec.nx - 1) as f64;
        }
        let dt = spec.final_time / (spec.nt - 1) as f64;
        let dx_min = dx[..n].iter().cloned().fold(f64::INFINITY, f64::min);
        let limit = spec.cfl_safety * dx_min / (n as f64).sqrt();
        // Relative slack absorbs the rounding in dt = T/(nt-1).
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, limit, safety: spec.cfl_safety });
        }
        let mut grid = Grid {
            n,
            lower,
            extents,
            final_time: spec.final_time,
            nx: spec.nx,
            nt: spec.nt,
            dx,
            dt,
            cfl_safety: spec.cfl_safety,
            boundary: Vec::new(),
        };
        grid.boundary = grid.build_boundary();
        Ok(grid)
    }

    fn build_boundary(&self) -> Vec<BoundaryNode> {
        let nx = self.nx;
        if self.n == 1 {
            return vec![
                BoundaryNode { node: 0, ij: [0, 0], normal: [-1.0, 0.0], weight: 1.0 },
                BoundaryNode { node: nx - 1, ij: [nx - 1, 0], normal: [1.0, 0.0], weight: 1.0 },
            ];
        }
        let [hx, hy] = self.dx;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let last = nx - 1;
        let mut ij = Vec::with_capacity(4 * last);
        for i in 0..last {
            ij.push([i, 0]);
        }
        for j in 0..last {
            ij.push([last, j]);
        }
        for i in (1..=last).rev() {
            ij.push([i, last]);
        }
        for j in (1..=last).rev() {
            ij.push([0, j]);
        }
        ij.into_iter()
            .map(|[i, j]| {
                let nxv = if i == 0 { -1.0 } else if i == last { 1.0 } else { 0.0 };
                let nyv = if j == 0 { -1.0 } else if j == last { 1.0 } else { 0.0 };
                let (normal, weight) = if nxv != 0.0 && nyv != 0.0 {
                    ([nxv * r, nyv * r], 0.5 * (hx + hy))
                } else if nxv != 0.0 {
                    ([nxv, 0.0], hy)
                } else {
                    ([0.0, nyv], hx)
                };
                BoundaryNode { node: j * nx + i, ij: [i, j], normal, weight }
            })
            .collect()
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            n: self.n,
            lower: self.lower[..self.n].to_vec(),
            extents: self.extents[..self.n].to_vec(),
            final_time: self.final_time,
            nx: self.nx,
            nt: self.nt,
            cfl_safety: self.cfl_safety,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn dx(&self) -> f64 {
        self.dx[0]
    }
    pub fn dx_axis(&self, axis: usize) -> f64 {
        self.dx[axis]
    }
    pub fn dx_min(&self) -> f64 {
        self.dx[..self.n].iter().cloned().fold(f64::INFINITY, f64::min)
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn final_time(&self) -> f64 {
        self.final_time
    }
    pub fn cfl_safety(&self) -> f64 {
        self.cfl_safety
    }
    pub fn lower(&self, axis: usize) -> f64 {
        self.lower[axis]
    }
    pub fn extent(&self, axis: usize) -> f64 {
        self.extents[axis]
    }
    pub fn upper(&self, axis: usize) -> f64 {
        self.lower[axis] + self.extents[axis]
    }

    /// Centre of the bounding box.
    pub fn center(&self) -> [f64; 2] {
        let mut c = [0.0; 2];
        for a in 0..self.n {
            c[a] = self.lower[a] + 0.5 * self.extents[a];
        }
        c
    }

    /// Twice the radius of the smallest ball containing the box (its diagonal).
    pub fn diameter(&self) -> f64 {
        self.extents[..self.n].iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    /// Volume of Ω.
    pub fn volume(&self) -> f64 {
        self.extents[..self.n].iter().product()
    }

    /// Courant number dt·√n / dx_min.
    pub fn courant(&self) -> f64 {
        self.dt * (self.n as f64).sqrt() / self.dx_min()
    }

    pub fn node_count(&self) -> usize {
        self.nx.pow(self.n as u32)
    }

    pub fn sample_count(&self) -> usize {
        self.node_count() * self.nt
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + i as f64 * self.dx[axis]
    }

    /// Coordinates of a spatial node (second entry 0 in 1D).
    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        if self.n == 1 {
            [self.coord(0, node), 0.0]
        } else {
            [self.coord(0, node % self.nx), self.coord(1, node / self.nx)]
        }
    }

    pub fn boundary_nodes(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary.len()
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        let last = self.nx - 1;
        if self.n == 1 {
            node == 0 || node == last
        } else {
            let (i, j) = (node % self.nx, node / self.nx);
            i == 0 || j == 0 || i == last || j == last
        }
    }

    /// Trapezoid weights along one spatial axis.
    pub fn axis_weights(&self, axis: usize) -> Vec<f64> {
        trapezoid_weights(self.nx, self.dx[axis])
    }

    /// Trapezoid weights over all spatial nodes.
    pub fn space_weights(&self) -> Vec<f64> {
        let wx = self.axis_weights(0);
        if self.n == 1 {
            return wx;
        }
        let wy = self.axis_weights(1);
        let mut w = Vec::with_capacity(self.node_count());
        for wyj in &wy {
            for wxi in &wx {
                w.push(wxi * wyj);
            }
        }
        w
    }

    pub fn time_weights(&self) -> Vec<f64> {
        trapezoid_weights(self.nt, self.dt)
    }

    /// Nearest level index to time t, clamped to the grid.
    pub fn level_of(&self, t: f64) -> usize {
        let k = (t / self.dt).round();
        k.clamp(0.0, (self.nt - 1) as f64) as usize
    }
}

pub fn trapezoid_weights(count: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; count];
    if count > 0 {
        w[0] = 0.5 * h;
        w[count - 1] = 0.5 * h;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_are_exact() {
        let g = GridSpec::interval(1.0, 3.5, 401, 1601).build().unwrap();
        assert_eq!(g.dx(), 1.0 / 400.0);
        assert_eq!(g.dt(), 3.5 / 1600.0);
        assert_eq!(g.boundary_count(), 2);
    }

    #[test]
    fn cfl_rejected() {
        let err = GridSpec::interval(1.0, 2.0, 101, 101).build().unwrap_err();
        assert!(matches!(err, Error::CflViolation { .. }));
        let err = GridSpec::square(1.0, 1.0, 101, 101).build().unwrap_err();
        assert!(matches!(err, Error::CflViolation { .. }));
    }

    #[test]
    fn small_grids_rejected() {
        assert!(GridSpec::interval(1.0, 0.1, 2, 10).build().is_err());
        assert!(GridSpec::interval(1.0, 0.001, 10, 2).build().is_err());
    }

    #[test]
    fn perimeter_is_counter_clockwise() {
        let g = GridSpec::square(1.0, 0.5, 5, 100).build().unwrap();
        let b = g.boundary_nodes();
        assert_eq!(b.len(), 16);
        assert_eq!(b[0].ij, [0, 0]);
        assert_eq!(b[4].ij, [4, 0]);
        assert_eq!(b[8].ij, [4, 4]);
        assert_eq!(b[12].ij, [0, 4]);
        let perimeter: f64 = b.iter().map(|n| n.weight).sum();
        assert!((perimeter - 4.0).abs() < 1e-12);
        let mut seen: Vec<usize> = b.iter().map(|n| n.node).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 16);
        assert!(b.iter().all(|n| g.is_boundary_node(n.node)));
    }
}
