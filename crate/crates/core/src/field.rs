//! Sampled functions on the grid, on its lateral boundary, and on a single time slice.
//!
//! All storage is time-major: sample `(level, node)` lives at `level * nodes + node`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRole {
    Solution,
    Source,
    Linear,
    Bilinear,
    Remainder,
    Auxiliary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalRole {
    Dirichlet,
    Neumann,
    Instrument,
    Noise,
}

fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteValue(what.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    grid: Arc<Grid>,
    role: FieldRole,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: &Arc<Grid>, role: FieldRole) -> Self {
        SpaceTimeField { grid: grid.clone(), role, values: vec![0.0; grid.sample_count()] }
    }

    pub fn from_values(grid: &Arc<Grid>, role: FieldRole, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.sample_count() {
            return Err(Error::SizeMismatch { expected: grid.sample_count(), got: values.len() });
        }
        check_finite(&values, "space-time field")?;
        Ok(SpaceTimeField { grid: grid.clone(), role, values })
    }

    /// Samples `f(x, y, t)` at every node and level (y = 0 in 1D).
    pub fn from_fn(grid: &Arc<Grid>, role: FieldRole, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let nodes = grid.node_count();
        let coords: Vec<[f64; 2]> = (0..nodes).map(|k| grid.node_coords(k)).collect();
        let mut values = Vec::with_capacity(grid.sample_count());
        for n in 0..grid.nt() {
            let t = grid.time(n);
            for c in &coords {
                values.push(f(c[0], c[1], t));
            }
        }
        SpaceTimeField { grid: grid.clone(), role, values }
    }

    pub(crate) fn from_raw(grid: &Arc<Grid>, role: FieldRole, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.sample_count());
        SpaceTimeField { grid: grid.clone(), role, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn role(&self) -> FieldRole {
        self.role
    }
    pub fn with_role(mut self, role: FieldRole) -> Self {
        self.role = role;
        self
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn level(&self, n: usize) -> &[f64] {
        let m = self.grid.node_count();
        &self.values[n * m..(n + 1) * m]
    }

    pub fn slice(&self, n: usize) -> SpatialField {
        SpatialField { grid: self.grid.clone(), values: self.level(n).to_vec() }
    }

    pub fn at(&self, level: usize, node: usize) -> f64 {
        self.values[level * self.grid.node_count() + node]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_grid(&self, grid: &Arc<Grid>) -> Result<()> {
        if same_grid(&self.grid, grid) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("field lives on a different grid".into()))
        }
    }

    /// `self + c * other`, same role as `self`.
    pub fn axpy(&self, c: f64, other: &SpaceTimeField) -> Result<SpaceTimeField> {
        other.check_grid(&self.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Ok(SpaceTimeField { grid: self.grid.clone(), role: self.role, values })
    }

    pub fn scaled(&self, c: f64) -> SpaceTimeField {
        SpaceTimeField {
            grid: self.grid.clone(),
            role: self.role,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Restriction to the lateral boundary.
    pub fn trace(&self, role: SignalRole) -> BoundarySignal {
        let nodes = self.grid.node_count();
        let b = self.grid.boundary_nodes();
        let mut values = Vec::with_capacity(b.len() * self.grid.nt());
        for n in 0..self.grid.nt() {
            let lvl = &self.values[n * nodes..(n + 1) * nodes];
            values.extend(b.iter().map(|bn| lvl[bn.node]));
        }
        BoundarySignal { grid: self.grid.clone(), role, values }
    }

    /// Space-time trapezoid integral.
    pub fn integrate(&self) -> f64 {
        let ws = self.grid.space_weights();
        let wt = self.grid.time_weights();
        let mut total = 0.0;
        for (n, w) in wt.iter().enumerate() {
            let s: f64 = self.level(n).iter().zip(&ws).map(|(v, w)| v * w).sum();
            total += w * s;
        }
        total
    }
}

#[derive(Debug, Clone)]
pub struct BoundarySignal {
    grid: Arc<Grid>,
    role: SignalRole,
    values: Vec<f64>,
}

impl BoundarySignal {
    pub fn zeros(grid: &Arc<Grid>, role: SignalRole) -> Self {
        BoundarySignal { grid: grid.clone(), role, values: vec![0.0; grid.boundary_count() * grid.nt()] }
    }

    pub fn from_values(grid: &Arc<Grid>, role: SignalRole, values: Vec<f64>) -> Result<Self> {
        let expected = grid.boundary_count() * grid.nt();
        if values.len() != expected {
            return Err(Error::SizeMismatch { expected, got: values.len() });
        }
        check_finite(&values, "boundary signal")?;
        Ok(BoundarySignal { grid: grid.clone(), role, values })
    }

    /// Samples `f(x, y, t)` at every lateral node and level.
    pub fn from_fn(grid: &Arc<Grid>, role: SignalRole, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let coords: Vec<[f64; 2]> = grid.boundary_nodes().iter().map(|b| grid.node_coords(b.node)).collect();
        let mut values = Vec::with_capacity(coords.len() * grid.nt());
        for n in 0..grid.nt() {
            let t = grid.time(n);
            for c in &coords {
                values.push(f(c[0], c[1], t));
            }
        }
        BoundarySignal { grid: grid.clone(), role, values }
    }

    pub(crate) fn from_raw(grid: &Arc<Grid>, role: SignalRole, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.boundary_count() * grid.nt());
        BoundarySignal { grid: grid.clone(), role, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn role(&self) -> SignalRole {
        self.role
    }
    pub fn with_role(mut self, role: SignalRole) -> Self {
        self.role = role;
        self
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn level(&self, n: usize) -> &[f64] {
        let m = self.grid.boundary_count();
        &self.values[n * m..(n + 1) * m]
    }

    pub fn at(&self, level: usize, b: usize) -> f64 {
        self.values[level * self.grid.boundary_count() + b]
    }

    /// Time series at one boundary node.
    pub fn node_series(&self, b: usize) -> Vec<f64> {
        let m = self.grid.boundary_count();
        (0..self.grid.nt()).map(|n| self.values[n * m + b]).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_grid(&self, grid: &Arc<Grid>) -> Result<()> {
        if same_grid(&self.grid, grid) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("signal lives on a different grid".into()))
        }
    }

    pub fn axpy(&self, c: f64, other: &BoundarySignal) -> Result<BoundarySignal> {
        other.check_grid(&self.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Ok(BoundarySignal { grid: self.grid.clone(), role: self.role, values })
    }

    pub fn scaled(&self, c: f64) -> BoundarySignal {
        BoundarySignal {
            grid: self.grid.clone(),
            role: self.role,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Linear combination `Σ c_k s_k` of signals on one grid.
    pub fn combine(terms: &[(f64, &BoundarySignal)], role: SignalRole) -> Result<BoundarySignal> {
        let first = terms.first().ok_or_else(|| Error::InvalidParameter("empty combination".into()))?;
        let mut out = BoundarySignal::zeros(first.1.grid(), role);
        for (c, s) in terms {
            s.check_grid(&out.grid)?;
            if *c == 0.0 {
                continue;
            }
            for (o, v) in out.values.iter_mut().zip(&s.values) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    /// Discrete compatibility of order s at t = 0: the first s+1 levels vanish, so
    /// the value and the first s forward time differences are zero.
    pub fn check_compatibility(&self, s: usize, tol: f64) -> Result<()> {
        let levels = (s + 1).min(self.grid.nt());
        for n in 0..levels {
            if let Some(v) = self.level(n).iter().find(|v| v.abs() > tol) {
                return Err(Error::Incompatible(format!(
                    "Dirichlet data {v:e} at level {n} violates order-{s} compatibility at t = 0"
                )));
            }
        }
        Ok(())
    }
}

/// Values on the spatial nodes at one time.
#[derive(Debug, Clone)]
pub struct SpatialField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl SpatialField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        SpatialField { grid: grid.clone(), values: vec![0.0; grid.node_count()] }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::SizeMismatch { expected: grid.node_count(), got: values.len() });
        }
        check_finite(&values, "spatial field")?;
        Ok(SpatialField { grid: grid.clone(), values })
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|k| {
                let c = grid.node_coords(k);
                f(c[0], c[1])
            })
            .collect();
        SpatialField { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_grid(&self, grid: &Arc<Grid>) -> Result<()> {
        if same_grid(&self.grid, grid) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("spatial field lives on a different grid".into()))
        }
    }

    pub fn integrate(&self) -> f64 {
        self.values.iter().zip(self.grid.space_weights()).map(|(v, w)| v * w).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.space_weights())
            .map(|(v, w)| v * v * w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn axpy(&self, c: f64, other: &SpatialField) -> Result<SpatialField> {
        other.check_grid(&self.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Ok(SpatialField { grid: self.grid.clone(), values })
    }

    /// Bilinear (linear in 1D) interpolation; zero outside the box.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let g = &*self.grid;
        let nx = g.nx();
        let fx = (x - g.lower(0)) / g.dx_axis(0);
        if !(fx >= 0.0 && fx <= (nx - 1) as f64) {
            return 0.0;
        }
        let i = (fx.floor() as usize).min(nx - 2);
        let sx = fx - i as f64;
        if g.dim() == 1 {
            return (1.0 - sx) * self.values[i] + sx * self.values[i + 1];
        }
        let fy = (y - g.lower(1)) / g.dx_axis(1);
        if !(fy >= 0.0 && fy <= (nx - 1) as f64) {
            return 0.0;
        }
        let j = (fy.floor() as usize).min(nx - 2);
        let sy = fy - j as f64;
        let v = &self.values;
        let k = j * nx + i;
        (1.0 - sy) * ((1.0 - sx) * v[k] + sx * v[k + 1]) + sy * ((1.0 - sx) * v[k + nx] + sx * v[k + nx + 1])
    }
}
