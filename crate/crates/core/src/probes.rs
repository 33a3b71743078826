//! Cutoffs, Gaussian plane-wave packets and the measurement function v₀ with its trace ψ.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BoundarySignal, FieldRole, SignalRole, SpaceTimeField};
use crate::forward::AdmissibleWindow;
use crate::grid::Grid;
use crate::wave::lateral_sobolev_norm;

/// Default resolution rule: dx·√τ ≤ 1/4.
pub const DEFAULT_RESOLUTION: f64 = 0.25;

/// C^∞ step from 0 (x ≤ 0) to 1 (x ≥ 1).
fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// χ with χ = 1 on |l| ≤ alpha − width, χ = 0 on |l| ≥ alpha.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothCutoff {
    alpha: f64,
    width: f64,
}

impl SmoothCutoff {
    pub fn new(alpha: f64, width: f64) -> Result<Self> {
        if !(width > 0.0 && width < alpha && alpha.is_finite()) {
            return Err(Error::InvalidWidth(format!("need 0 < smooth_width < alpha, got width {width}, alpha {alpha}")));
        }
        Ok(SmoothCutoff { alpha, width })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn eval(&self, l: f64) -> f64 {
        1.0 - smooth_step((l.abs() - (self.alpha - self.width)) / self.width)
    }
}

pub fn smooth_cutoff(alpha: f64, smooth_width: f64) -> Result<SmoothCutoff> {
    SmoothCutoff::new(alpha, smooth_width)
}

/// Where a packet sits and which way it travels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PacketCenter {
    /// 1D: l = (x − x₀) − o·(t − t₀) with orientation o = ±1.
    Point { x0: f64, t0: f64, orientation: i8 },
    /// 2D: with s = (x − c)·θ (c the box centre), l = s − t − (η − t₀) for o = +1 and
    /// l = −s − t + (η + t₀) for o = −1.
    Plane { t0: f64, theta: [f64; 2], eta: f64, orientation: i8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    pub tau: f64,
    pub alpha: f64,
    pub smooth_width: f64,
    pub center: PacketCenter,
    /// Multiply by τ^{−1/2}, giving peak 1 (the auxiliary packets for m > 2).
    #[serde(default)]
    pub unit_peak: bool,
}

impl PacketSpec {
    pub fn point(tau: f64, alpha: f64, smooth_width: f64, x0: f64, t0: f64, orientation: i8) -> Self {
        PacketSpec { tau, alpha, smooth_width, center: PacketCenter::Point { x0, t0, orientation }, unit_peak: false }
    }

    pub fn plane(tau: f64, alpha: f64, smooth_width: f64, t0: f64, theta: [f64; 2], eta: f64, orientation: i8) -> Self {
        PacketSpec {
            tau,
            alpha,
            smooth_width,
            center: PacketCenter::Plane { t0, theta, eta, orientation },
            unit_peak: false,
        }
    }

    pub fn with_unit_peak(mut self) -> Self {
        self.unit_peak = true;
        self
    }

    fn validate(&self, grid: &Grid, resolution: f64) -> Result<(SmoothCutoff, [f64; 2])> {
        if !(self.tau >= 1.0) {
            return Err(Error::InvalidParameter(format!("tau must be >= 1, got {}", self.tau)));
        }
        let chi = SmoothCutoff::new(self.alpha, self.smooth_width)?;
        let value = grid.dx_min() * self.tau.sqrt();
        if value > resolution {
            return Err(Error::UnderResolved { value, limit: resolution });
        }
        match self.center {
            PacketCenter::Point { orientation, .. } => {
                if grid.dim() != 1 {
                    return Err(Error::DimensionUnsupported(grid.dim()));
                }
                check_orientation(orientation)?;
            }
            PacketCenter::Plane { theta, orientation, .. } => {
                if grid.dim() != 2 {
                    return Err(Error::DimensionUnsupported(grid.dim()));
                }
                check_orientation(orientation)?;
                let norm = (theta[0] * theta[0] + theta[1] * theta[1]).sqrt();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!("theta must be a unit vector, |theta| = {norm}")));
                }
            }
        }
        let c = grid.center();
        Ok((chi, [c[0], if grid.dim() == 2 { c[1] } else { 0.0 }]))
    }

    /// Phase l(x, y, t) of the packet.
    fn phase(&self, c: [f64; 2], x: f64, y: f64, t: f64) -> f64 {
        match self.center {
            PacketCenter::Point { x0, t0, orientation } => (x - x0) - orientation as f64 * (t - t0),
            PacketCenter::Plane { t0, theta, eta, orientation } => {
                let s = (x - c[0]) * theta[0] + (y - c[1]) * theta[1];
                if orientation > 0 {
                    s - t - (eta - t0)
                } else {
                    -s - t + (eta + t0)
                }
            }
        }
    }

    fn profile(&self, chi: &SmoothCutoff, l: f64) -> f64 {
        let g = (-0.5 * self.tau * l * l).exp() * chi.eval(l);
        if self.unit_peak {
            g
        } else {
            self.tau.sqrt() * g
        }
    }
}

fn check_orientation(o: i8) -> Result<()> {
    if o == 1 || o == -1 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("orientation must be +1 or -1, got {o}")))
    }
}

/// Closure evaluating a validated packet at (x, y, t).
pub fn packet_fn(spec: &PacketSpec, grid: &Grid) -> Result<impl Fn(f64, f64, f64) -> f64> {
    packet_fn_with(spec, grid, DEFAULT_RESOLUTION)
}

pub fn packet_fn_with(spec: &PacketSpec, grid: &Grid, resolution: f64) -> Result<impl Fn(f64, f64, f64) -> f64> {
    let (chi, c) = spec.validate(grid, resolution)?;
    let spec = *spec;
    Ok(move |x: f64, y: f64, t: f64| spec.profile(&chi, spec.phase(c, x, y, t)))
}

/// The packet sampled on the grid and its lateral trace.
pub fn gaussian_packet(spec: &PacketSpec, grid: &Arc<Grid>) -> Result<(SpaceTimeField, BoundarySignal)> {
    let f = packet_fn(spec, grid)?;
    let field = SpaceTimeField::from_fn(grid, FieldRole::Auxiliary, &f);
    let trace = field.trace(SignalRole::Dirichlet);
    Ok((field, trace))
}

/// Lateral trace only; cheap in 2D where the full field is large.
pub fn packet_trace(spec: &PacketSpec, grid: &Arc<Grid>) -> Result<BoundarySignal> {
    let f = packet_fn(spec, grid)?;
    Ok(BoundarySignal::from_fn(grid, SignalRole::Dirichlet, f))
}

pub fn packet_trace_norm(spec: &PacketSpec, grid: &Arc<Grid>, gamma: f64) -> Result<f64> {
    lateral_sobolev_norm(&packet_trace(spec, grid)?, gamma)
}

/// Largest α for which both packets of a crossing pair vanish on ∂Ω at t = 0.
pub fn max_packet_alpha(grid: &Grid, center: PacketCenter) -> f64 {
    let c = grid.center();
    let c = [c[0], if grid.dim() == 2 { c[1] } else { 0.0 }];
    let mut best = f64::INFINITY;
    for b in grid.boundary_nodes() {
        let p = grid.node_coords(b.node);
        for o in [1i8, -1] {
            let spec = PacketSpec {
                tau: 1.0,
                alpha: 1.0,
                smooth_width: 0.5,
                center: match center {
                    PacketCenter::Point { x0, t0, .. } => PacketCenter::Point { x0, t0, orientation: o },
                    PacketCenter::Plane { t0, theta, eta, .. } => PacketCenter::Plane { t0, theta, eta, orientation: o },
                },
                unit_peak: false,
            };
            best = best.min(spec.phase(c, p[0], p[1], 0.0).abs());
        }
    }
    best
}

/// Cutoff half-width used when none is given: α + α/2 stays 2% inside `max_packet_alpha`,
/// with the taper width taken as α/2.
pub fn default_packet_alpha(grid: &Grid, center: PacketCenter) -> f64 {
    0.98 * max_packet_alpha(grid, center) / 1.5
}

/// v₀(x,t) = χ((x − x₀)·θ − (t − t₀)) with its trace ψ and the support mask Σ̃.
#[derive(Debug, Clone)]
pub struct MeasurementFunction {
    grid: Arc<Grid>,
    chi: SmoothCutoff,
    /// Plateau half-width: (t₂ − t₁ + d)/2.
    alpha: f64,
    t0: f64,
    x0: [f64; 2],
    theta: [f64; 2],
    psi: BoundarySignal,
    mask: Vec<bool>,
}

impl MeasurementFunction {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn x0(&self) -> [f64; 2] {
        self.x0
    }

    pub fn theta(&self) -> [f64; 2] {
        self.theta
    }

    pub fn smooth_width(&self) -> f64 {
        self.chi.width()
    }

    /// [t₁, t₂] recovered from α = (t₂ − t₁ + d)/2 and t₀ = (t₁ + t₂)/2.
    pub fn plateau_times(&self) -> (f64, f64) {
        let half = self.alpha - 0.5 * self.grid.diameter();
        (self.t0 - half, self.t0 + half)
    }

    pub fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        let l = (x - self.x0[0]) * self.theta[0] + (y - self.x0[1]) * self.theta[1] - (t - self.t0);
        self.chi.eval(l)
    }

    /// v₀ on the whole space-time grid, built on demand.
    pub fn v0(&self) -> SpaceTimeField {
        SpaceTimeField::from_fn(&self.grid, FieldRole::Auxiliary, |x, y, t| self.value(x, y, t))
    }

    pub fn psi(&self) -> &BoundarySignal {
        &self.psi
    }

    /// Time-major flags of the lateral samples where ψ ≠ 0.
    pub fn support_mask(&self) -> &[bool] {
        &self.mask
    }

    /// Bound on ‖v₀‖_{C¹}: the cutoff's sup is 1 and its slope is at most ~2/width in each of x and t.
    pub fn c1_bound(&self) -> f64 {
        let h = self.chi.width() * 1e-3;
        let lo = self.chi.alpha() - self.chi.width();
        let slope = (0..=1000)
            .map(|k| {
                let l = lo + self.chi.width() * k as f64 / 1000.0;
                ((self.chi.eval(l + h) - self.chi.eval(l - h)) / (2.0 * h)).abs()
            })
            .fold(0.0, f64::max);
        1.0 + 2.0 * slope
    }
}

/// Builds v₀ for the admissible window: α = (t₂ − t₁ + d)/2, t₀ = (t₁ + t₂)/2, x₀ the box centre.
///
/// The cutoff equals 1 on |l| ≤ α and vanishes for |l| ≥ α + smooth_width.
pub fn measurement_function(
    grid: &Arc<Grid>,
    window: &AdmissibleWindow,
    theta: [f64; 2],
    smooth_width: f64,
) -> Result<MeasurementFunction> {
    let d = grid.diameter();
    let lam = window.lam;
    if grid.final_time() < 2.0 * d + 2.0 * lam - 1e-12 {
        return Err(Error::GeometryViolation(format!(
            "T = {} < 2d + 2λ = {}",
            grid.final_time(),
            2.0 * d + 2.0 * lam
        )));
    }
    if !(smooth_width > 0.0 && smooth_width < lam) {
        return Err(Error::InvalidWidth(format!("need 0 < smooth_width < λ = {lam}, got {smooth_width}")));
    }
    let norm = (theta[0] * theta[0] + theta[1] * theta[1]).sqrt();
    let theta = if grid.dim() == 1 { [theta[0].signum(), 0.0] } else { theta };
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("theta must be a unit vector, |theta| = {norm}")));
    }
    let alpha = (window.t2 - window.t1 + d) / 2.0;
    let chi = SmoothCutoff::new(alpha + smooth_width, smooth_width)?;
    let c = grid.center();
    let x0 = [c[0], if grid.dim() == 2 { c[1] } else { 0.0 }];
    let t0 = 0.5 * (window.t1 + window.t2);
    let mut mf = MeasurementFunction {
        grid: grid.clone(),
        chi,
        alpha,
        t0,
        x0,
        theta,
        psi: BoundarySignal::zeros(grid, SignalRole::Instrument),
        mask: Vec::new(),
    };
    let psi = BoundarySignal::from_fn(grid, SignalRole::Instrument, |x, y, t| mf.value(x, y, t));
    mf.mask = psi.values().iter().map(|v| *v != 0.0).collect();
    mf.psi = psi;
    Ok(mf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::wave::{discrete_wave_operator, lateral_inner_product, lateral_inner_product_masked};

    fn grid1(nx: usize, nt: usize, t: f64) -> Arc<Grid> {
        Arc::new(Grid::new(&GridSpec::interval(1.0, t, nx, nt)).unwrap())
    }

    #[test]
    fn cutoff_shape() {
        let chi = smooth_cutoff(0.5, 0.2).unwrap();
        assert_eq!(chi.eval(0.0), 1.0);
        assert_eq!(chi.eval(0.3), 1.0);
        assert_eq!(chi.eval(0.5), 0.0);
        assert_eq!(chi.eval(-0.5), 0.0);
        let mut prev = 1.0;
        for k in 0..=200 {
            let v = chi.eval(0.3 + 0.2 * k as f64 / 200.0);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
        assert!(matches!(smooth_cutoff(0.5, 0.5), Err(Error::InvalidWidth(_))));
        assert!(matches!(smooth_cutoff(0.5, 0.0), Err(Error::InvalidWidth(_))));
    }

    #[test]
    fn packet_peak_and_pair_product() {
        let g = grid1(401, 1601, 3.5);
        let tau = 400.0;
        let h1 = packet_fn(&PacketSpec::point(tau, 0.15, 0.05, 0.5, 1.75, 1), &g).unwrap();
        let h2 = packet_fn(&PacketSpec::point(tau, 0.15, 0.05, 0.5, 1.75, -1), &g).unwrap();
        assert!((h1(0.5, 0.0, 1.75) - 20.0).abs() < 1e-12);
        assert!((h1(0.6, 0.0, 1.85) - 20.0).abs() < 1e-12);
        for (x, t) in [(0.52, 1.76), (0.47, 1.72), (0.5, 1.78)] {
            let prod = tau * (-tau * ((x - 0.5f64).powi(2) + (t - 1.75f64).powi(2))).exp();
            assert!((h1(x, 0.0, t) * h2(x, 0.0, t) - prod).abs() < 1e-12 * prod.max(1.0));
        }
        let unit = packet_fn(&PacketSpec::point(tau, 0.15, 0.05, 0.5, 1.75, 1).with_unit_peak(), &g).unwrap();
        assert!((unit(0.5, 0.0, 1.75) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn packet_resolution_enforced() {
        let g = grid1(101, 401, 3.5);
        let r = gaussian_packet(&PacketSpec::point(1600.0, 0.15, 0.05, 0.5, 1.75, 1), &g);
        assert!(matches!(r, Err(Error::UnderResolved { .. })));
    }

    #[test]
    fn packet_residual_scales_like_dx2() {
        // On g(x − t) the leapfrog stencil leaves (dt² − dx²)/12·g⁗ + O(dx⁴), and
        // max|g⁗| = 3τ^{5/2} for g = τ^{1/2}e^{−τl²/2}. Checked on the plateau (χ ≡ 1 on
        // every stencil point); everywhere the residual must halve twice per refinement.
        let tau = 100.0;
        let spec = PacketSpec::point(tau, 0.45, 0.15, 0.5, 1.75, 1);
        let mut errs = Vec::new();
        for nx in [201, 401] {
            let g = grid1(nx, 4 * (nx - 1) + 1, 3.5);
            let (h, _) = gaussian_packet(&spec, &g).unwrap();
            let r = discrete_wave_operator(&h);
            let nu = g.courant();
            let bound = 1.1 * (1.0 - nu * nu) * g.dx() * g.dx() / 12.0 * 3.0 * tau.powf(2.5);
            let reach = 0.3 - 2.0 * g.dx();
            for n in 1..g.nt() - 1 {
                for i in 1..nx - 1 {
                    let (x, t) = (g.coord(0, i), g.time(n));
                    if ((x - 0.5) - (t - 1.75)).abs() < reach {
                        assert!(r.at(n, i).abs() <= bound, "{} > {bound}", r.at(n, i));
                    }
                }
            }
            errs.push(r.max_abs());
        }
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.4 && ratio < 4.6, "{ratio}");
    }

    #[test]
    fn packet_mass() {
        let g = grid1(801, 3201, 3.5);
        for tau in [100.0, 400.0] {
            let h1 = packet_fn(&PacketSpec::point(tau, 0.4, 0.1, 0.5, 1.75, 1), &g).unwrap();
            let h2 = packet_fn(&PacketSpec::point(tau, 0.4, 0.1, 0.5, 1.75, -1), &g).unwrap();
            let prod = SpaceTimeField::from_fn(&g, FieldRole::Auxiliary, |x, y, t| h1(x, y, t) * h2(x, y, t));
            // H₁H₂ already carries the factor τ, so the normalisation is 1/π.
            let mass = prod.integrate() / std::f64::consts::PI;
            assert!((mass - 1.0).abs() < 0.02, "{tau}: {mass}");
        }
    }

    #[test]
    fn measurement_function_properties() {
        let g = grid1(201, 801, 3.5);
        let w = AdmissibleWindow::with_default_lambda(&g).unwrap();
        let mf = measurement_function(&g, &w, [1.0, 0.0], 0.1).unwrap();
        let v0 = mf.v0();
        let nt = g.nt();
        for n in 0..nt {
            let t = g.time(n);
            for (k, v) in v0.level(n).iter().enumerate() {
                if t >= w.t1 && t <= w.t2 {
                    assert_eq!(*v, 1.0, "node {k} t {t}");
                }
            }
        }
        for k in 0..g.node_count() {
            assert_eq!(v0.at(nt - 1, k), 0.0);
            assert_eq!(v0.at(nt - 1, k) - v0.at(nt - 2, k), 0.0);
        }
        // The e^{−1/x} taper needs ~40 nodes across before the O(dx²) regime sets in.
        let coarse = grid1(401, 1601, 3.5);
        let fine = grid1(801, 3201, 3.5);
        let wf = AdmissibleWindow::with_default_lambda(&fine).unwrap();
        let r0 = discrete_wave_operator(&measurement_function(&coarse, &wf, [1.0, 0.0], 0.1).unwrap().v0()).max_abs();
        let r1 = discrete_wave_operator(&measurement_function(&fine, &wf, [1.0, 0.0], 0.1).unwrap().v0()).max_abs();
        assert!(r0 / r1 > 3.4 && r0 / r1 < 4.6, "{r0} {r1}");
        // ψ vanishes off the mask and the masked pairing agrees with the full one.
        let h = packet_trace(&PacketSpec::point(100.0, 0.15, 0.05, 0.5, 1.75, 1), &g).unwrap();
        let full = lateral_inner_product(mf.psi(), &h).unwrap();
        let masked = lateral_inner_product_masked(mf.psi(), &h, mf.support_mask()).unwrap();
        assert_eq!(full, masked);
        assert!(mf.psi().values().iter().zip(mf.support_mask()).all(|(v, m)| *m || *v == 0.0));
        assert!(matches!(measurement_function(&g, &w, [1.0, 0.0], 0.2), Err(Error::InvalidWidth(_))));
    }

    #[test]
    fn packet_alpha_bound_is_at_least_lambda() {
        let g = grid1(201, 801, 3.5);
        let w = AdmissibleWindow::with_default_lambda(&g).unwrap();
        let a = max_packet_alpha(&g, PacketCenter::Point { x0: 0.3, t0: w.t1, orientation: 1 });
        assert!(a >= w.lam - 1e-12, "{a}");
    }

    #[test]
    fn trace_norm_matches_gaussian_oracle() {
        // Each endpoint sees the full profile τ^{1/2}e^{−τl²/2} in t, whose H^γ(ℝ) norm is
        // ∫(1+ξ²)^γ e^{−ξ²/τ} dξ = √(πτ)·{1, 1 + τ/2, 1 + τ + 3τ²/4} for γ = 0, 1, 2.
        let g = grid1(401, 1601, 3.5);
        for tau in [25.0, 100.0, 400.0] {
            let spec = PacketSpec::point(tau, 1.0, 0.3, 0.5, 1.75, 1);
            let base = (std::f64::consts::PI * tau).sqrt();
            for (gamma, poly) in [(0.0, 1.0), (1.0, 1.0 + tau / 2.0), (2.0, 1.0 + tau + 0.75 * tau * tau)] {
                let exact = (2.0 * base * poly).sqrt();
                let got = packet_trace_norm(&spec, &g, gamma).unwrap();
                assert!((got / exact - 1.0).abs() < 0.01, "tau {tau} gamma {gamma}: {got} vs {exact}");
            }
        }
    }
}
