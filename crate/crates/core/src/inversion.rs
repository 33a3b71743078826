//! Reconstruction of a from (possibly noisy) boundary data: the (τ, ε) schedule, noise
//! models, DN oracles, the integral identity, point and Radon-line estimates, and the
//! stability sweep.
//!
//! Sign conventions: with the outward normal and Λ(f) = ∂_ν u, Green's formula gives
//!
//!   m!∫ a v₀ v₁⋯v_m = ∫_Σ ψ D^mΛ(ε₁f₁ + ⋯ + ε_mf_m) + (1/(ε₁⋯ε_m))∫ v₀ □𝓡̃,
//!
//! and since ∫ H₁H₂ = π for the crossing pair, â = D^m⟨ψ, Λ + ℰ⟩ / (m!·π).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::field::{BoundarySignal, SignalRole, SpaceTimeField, SpatialField};
use crate::findiff::{factorial, mixed_difference, mixed_difference_par, AmplitudeStencil};
use crate::forward::{dn_map_with, expansion_terms, PicardSettings, Potential};
use crate::grid::Grid;
use crate::probes::{
    default_packet_alpha, max_packet_alpha, measurement_function, packet_trace, MeasurementFunction, PacketCenter,
    PacketSpec,
};
use crate::radon::{default_offsets, invert_radon, RadonData, MIN_ANGLES};
use crate::wave::{discrete_wave_operator, lateral_inner_product, lateral_sobolev_norm, solve_free};

/// τ₀ of the auxiliary unit-peak packets used when m > 2.
pub const AUX_TAU: f64 = 1.0;

// ---------------------------------------------------------------------------------------
// Schedule

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub delta: f64,
    pub kappa: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub s: f64,
    pub m: u32,
    pub n: usize,
    /// ŝ = (2m − 1)(s + 2)/2.
    pub s_hat: f64,
    /// γ₀ = κ^{2m−1}/M.
    pub gamma0: f64,
    pub tau: f64,
    pub eps: f64,
    pub sigma: f64,
}

impl ScheduleParams {
    /// f(ε, τ) = 2τ^{−1/2} + (γ₀δ/m)ε^{−m} + ε^{m−1}τ^ŝ/(m − 1).
    pub fn objective(&self, eps: f64, tau: f64) -> f64 {
        let m = self.m as f64;
        2.0 / tau.sqrt()
            + self.gamma0 * self.delta / m * eps.powf(-m)
            + eps.powf(m - 1.0) * tau.powf(self.s_hat) / (m - 1.0)
    }

    /// f at the scheduled (ε, τ).
    pub fn optimum(&self) -> f64 {
        self.objective(self.eps, self.tau)
    }

    /// Exponent σ′ with f(ε*, τ*) ~ δ^{σ′}.
    pub fn rate_exponent(&self) -> f64 {
        rate_exponent(self.s, self.m)
    }

    /// Same schedule with (τ, ε) replaced. Used for rate studies at prescribed τ.
    pub fn with_probe(mut self, tau: f64, eps: f64) -> Result<Self> {
        if !(tau >= 1.0 && tau.is_finite()) {
            return Err(Error::TauBelowOne(tau));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        self.tau = tau;
        self.eps = eps;
        Ok(self)
    }
}

/// (m − 1)/((2m − 1)(m(s + 2) + 1)).
pub fn rate_exponent(s: f64, m: u32) -> f64 {
    let m = m as f64;
    (m - 1.0) / ((2.0 * m - 1.0) * (m * (s + 2.0) + 1.0))
}

/// σ(s): the rate exponent for n = 1, divided by 2n otherwise.
pub fn stability_exponent(s: f64, m: u32, n: usize) -> f64 {
    let r = rate_exponent(s, m);
    if n == 1 {
        r
    } else {
        r / (2.0 * n as f64)
    }
}

/// Closed-form minimiser of f(ε, τ).
///
/// ∂_ε f = 0 gives ε^{2m−1}τ^ŝ = γ₀δ and ∂_τ f = 0 gives τ^{ŝ+1/2}ε^{m−1} = (m − 1)/ŝ, so
/// τ = ((m−1)/ŝ · (γ₀δ)^{−(m−1)/(2m−1)})^{2(2m−1)/(2mŝ+2m−1)}.
pub fn schedule_parameters(delta: f64, kappa: f64, big_m: f64, s: f64, m: u32, n: usize) -> Result<ScheduleParams> {
    if !(big_m > 0.0 && big_m.is_finite()) {
        return Err(Error::InvalidParameter(format!("M must be positive, got {big_m}")));
    }
    if !(delta > 0.0 && delta < big_m) {
        return Err(Error::DeltaOutOfRange { delta, bound: big_m });
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidParameter(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    if m < 2 {
        return Err(Error::InvalidParameter(format!("m must be >= 2, got {m}")));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("s must be >= 0, got {s}")));
    }
    if n == 0 {
        return Err(Error::DimensionUnsupported(n));
    }
    let mf = m as f64;
    let k = 2.0 * mf - 1.0;
    let s_hat = k * (s + 2.0) / 2.0;
    let gamma0 = kappa.powi(2 * m as i32 - 1) / big_m;
    let g = gamma0 * delta;
    let tau = ((mf - 1.0) / s_hat * g.powf(-(mf - 1.0) / k)).powf(2.0 * k / (2.0 * mf * s_hat + k));
    if tau < 1.0 {
        return Err(Error::TauBelowOne(tau));
    }
    let eps = g.powf(1.0 / k) * tau.powf(-s_hat / k);
    Ok(ScheduleParams { delta, kappa, big_m, s, m, n, s_hat, gamma0, tau, eps, sigma: stability_exponent(s, m, n) })
}

// ---------------------------------------------------------------------------------------
// Noise

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    None,
    DeterministicProfile,
    SeededRandomBandlimited,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Target H^r(Σ) magnitude.
    pub delta: f64,
    pub r: u32,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel { kind: NoiseKind::None, delta: 0.0, r: 0, seed: 0 }
    }

    pub fn new(kind: NoiseKind, delta: f64, r: u32, seed: u64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise delta must be >= 0, got {delta}")));
        }
        Ok(NoiseModel { kind, delta, r, seed })
    }

    fn is_silent(&self) -> bool {
        self.kind == NoiseKind::None || self.delta == 0.0
    }
}

/// SHA-256 of the sample bits; keys the random noise and the tabulated oracle.
pub fn signal_digest(f: &BoundarySignal) -> [u8; 32] {
    let mut h = Sha256::new();
    for v in f.values() {
        h.update(v.to_le_bytes());
    }
    h.finalize().into()
}

/// ℰ(f), scaled so that ‖ℰ(f)‖_{H^r(Σ)} ≤ δ.
///
/// The deterministic profile is δ(1 + tanh‖f‖)/2 · g₀ with a fixed smooth g₀ of unit norm, so it
/// depends on f nonlinearly. The random one is a sum of 16 to 32 sine modes in time per lateral
/// node, seeded by the model seed and a hash of f, rescaled to norm exactly δ.
pub fn make_noise(model: &NoiseModel, f: &BoundarySignal) -> Result<BoundarySignal> {
    let grid = f.grid();
    if model.is_silent() {
        return Ok(BoundarySignal::zeros(grid, SignalRole::Noise));
    }
    let nb = grid.boundary_count();
    let nt = grid.nt();
    let t_end = grid.final_time();
    let (raw, scale) = match model.kind {
        NoiseKind::None => unreachable!(),
        NoiseKind::DeterministicProfile => {
            let mut v = vec![0.0; nb * nt];
            for n in 0..nt {
                let t = grid.time(n) / t_end;
                let base = (PI * t).sin().powi(2) * (3.0 * PI * t).sin();
                for b in 0..nb {
                    v[n * nb + b] = base * (1.0 + 0.5 * (2.0 * PI * b as f64 / nb as f64).cos());
                }
            }
            let fnorm = lateral_sobolev_norm(f, 0.0)?;
            (v, 0.5 * (1.0 + fnorm.tanh()) * model.delta)
        }
        NoiseKind::SeededRandomBandlimited => {
            let d = signal_digest(f);
            let salt = u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"));
            let mut rng = ChaCha8Rng::seed_from_u64(model.seed ^ salt);
            let modes: usize = rng.gen_range(16..=32);
            let coef: Vec<f64> = (0..nb * modes).map(|_| rng.sample(StandardNormal)).collect();
            let mut v = vec![0.0; nb * nt];
            for n in 0..nt {
                let t = grid.time(n) / t_end;
                let basis: Vec<f64> = (1..=modes).map(|k| (k as f64 * PI * t).sin()).collect();
                for b in 0..nb {
                    v[n * nb + b] = coef[b * modes..(b + 1) * modes].iter().zip(&basis).map(|(c, s)| c * s).sum();
                }
            }
            (v, model.delta)
        }
    };
    let raw = BoundarySignal::from_values(grid, SignalRole::Noise, raw)?;
    let r = model.r as f64;
    let norm = lateral_sobolev_norm(&raw, r)?;
    if !(norm > 0.0) {
        return Ok(BoundarySignal::zeros(grid, SignalRole::Noise));
    }
    let mut out = raw.scaled(scale / norm);
    let got = lateral_sobolev_norm(&out, r)?;
    if got > scale {
        out = out.scaled(scale / got);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------------------
// DN oracles

/// Source of Neumann data (Λ + ℰ)(f) for Dirichlet inputs f.
pub trait DnOracle: Send + Sync {
    fn grid(&self) -> &Arc<Grid>;
    fn neumann(&self, f: &BoundarySignal) -> Result<BoundarySignal>;
}

/// Λ from the forward solver, optionally perturbed by a noise model.
#[derive(Debug, Clone)]
pub struct SimulatedDn {
    potential: Potential,
    settings: PicardSettings,
    noise: NoiseModel,
}

impl SimulatedDn {
    pub fn new(potential: Potential, settings: PicardSettings) -> Self {
        SimulatedDn { potential, settings, noise: NoiseModel::none() }
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }
}

impl DnOracle for SimulatedDn {
    fn grid(&self) -> &Arc<Grid> {
        self.potential.grid()
    }

    fn neumann(&self, f: &BoundarySignal) -> Result<BoundarySignal> {
        let (g, _) = dn_map_with(self.potential.grid(), &self.potential, f, &self.settings)?;
        if self.noise.is_silent() {
            return Ok(g);
        }
        g.axpy(1.0, &make_noise(&self.noise, f)?)
    }
}

/// Externally supplied pairs (f, Λf), looked up by the exact bits of f.
#[derive(Debug, Clone)]
pub struct TabulatedDn {
    grid: Arc<Grid>,
    table: HashMap<[u8; 32], BoundarySignal>,
}

impl TabulatedDn {
    pub fn new(grid: &Arc<Grid>) -> Self {
        TabulatedDn { grid: grid.clone(), table: HashMap::new() }
    }

    pub fn insert(&mut self, f: &BoundarySignal, neumann: BoundarySignal) -> Result<()> {
        f.check_grid(&self.grid)?;
        neumann.check_grid(&self.grid)?;
        self.table.insert(signal_digest(f), neumann);
        Ok(())
    }

    /// Tabulates another oracle on the given inputs.
    pub fn record(oracle: &dyn DnOracle, inputs: &[BoundarySignal]) -> Result<Self> {
        let mut t = TabulatedDn::new(oracle.grid());
        for f in inputs {
            t.insert(f, oracle.neumann(f)?)?;
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl DnOracle for TabulatedDn {
    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn neumann(&self, f: &BoundarySignal) -> Result<BoundarySignal> {
        f.check_grid(&self.grid)?;
        self.table
            .get(&signal_digest(f))
            .cloned()
            .ok_or_else(|| Error::Incompatible("no tabulated Neumann data for this Dirichlet input".into()))
    }
}

// ---------------------------------------------------------------------------------------
// Integral identity

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityTerms {
    /// m!∫ a v₀ v₁⋯v_m.
    pub lhs: f64,
    /// ∫_Σ ψ D^mΛ(Σ εⱼfⱼ).
    pub boundary_term: f64,
    /// ∫ v₀ □(D^m𝓡).
    pub remainder_term: f64,
}

impl IdentityTerms {
    /// lhs − boundary_term.
    pub fn residual(&self) -> f64 {
        self.lhs - self.boundary_term
    }

    /// lhs − boundary_term − remainder_term; zero up to discretisation.
    pub fn closure(&self) -> f64 {
        self.lhs - self.boundary_term - self.remainder_term
    }
}

fn vertex_data(traces: &[BoundarySignal], amps: &[f64]) -> Result<BoundarySignal> {
    let terms: Vec<(f64, &BoundarySignal)> = amps.iter().copied().zip(traces.iter()).collect();
    BoundarySignal::combine(&terms, SignalRole::Dirichlet)
}

/// The three terms of the identity, each from its own code path: volume quadrature with the
/// known a, the mixed difference of instrument readings of the DN map, and the remainders of
/// the small-amplitude expansion.
pub fn integral_identity_eval(
    grid: &Arc<Grid>,
    a: &Potential,
    mf: &MeasurementFunction,
    packets: &[PacketSpec],
    eps: &[f64],
    settings: &PicardSettings,
) -> Result<IdentityTerms> {
    let m = a.m() as usize;
    if packets.len() != m {
        return Err(Error::SizeMismatch { expected: m, got: packets.len() });
    }
    let st = AmplitudeStencil::new(eps.to_vec())?;
    mf.psi().check_grid(grid)?;
    let traces = packets.iter().map(|p| packet_trace(p, grid)).collect::<Result<Vec<_>>>()?;

    // lhs: quadrature over the support box of a.
    let linear = traces.iter().map(|f| solve_free(grid, f)).collect::<Result<Vec<_>>>()?;
    let ws = grid.space_weights();
    let wt = grid.time_weights();
    let b = a.support();
    let nodes = grid.node_count();
    let mut lhs = 0.0;
    for n in b.n0..b.n1 {
        let t = grid.time(n);
        for (k, node) in b.nodes(grid.nx()).enumerate() {
            let p = grid.node_coords(node);
            let prod: f64 = linear.iter().map(|v| v.values()[n * nodes + node]).product();
            lhs += wt[n] * ws[node] * a.level_box(n)[k] * mf.value(p[0], p[1], t) * prod;
        }
    }
    lhs *= factorial(m);

    let boundary_term = mixed_difference(&st, |amps| {
        let f = vertex_data(&traces, amps)?;
        let (g, _) = dn_map_with(grid, a, &f, settings)?;
        lateral_inner_product(mf.psi(), &g)
    })?;

    let d_rem: SpaceTimeField =
        mixed_difference(&st, |amps| Ok(expansion_terms(grid, a, &traces, amps, settings)?.remainder))?;
    let box_rem = discrete_wave_operator(&d_rem);
    let mut remainder_term = 0.0;
    for (n, w) in wt.iter().enumerate() {
        let t = grid.time(n);
        let lvl = box_rem.level(n);
        for node in 0..nodes {
            // The one-sided stencil on ∂Ω is not part of the scheme; Σ has measure zero.
            if grid.is_boundary_node(node) {
                continue;
            }
            let p = grid.node_coords(node);
            remainder_term += w * ws[node] * mf.value(p[0], p[1], t) * lvl[node];
        }
    }
    Ok(IdentityTerms { lhs, boundary_term, remainder_term })
}

// ---------------------------------------------------------------------------------------
// Reconstruction

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub tau: f64,
    pub eps: f64,
    /// Packet cutoff half-width used.
    pub alpha: f64,
    /// D^m⟨ψ, Λ + ℰ⟩ before the 1/(m!π) normalisation.
    pub boundary_functional: f64,
}

fn with_orientation(c: PacketCenter, o: i8) -> PacketCenter {
    match c {
        PacketCenter::Point { x0, t0, .. } => PacketCenter::Point { x0, t0, orientation: o },
        PacketCenter::Plane { t0, theta, eta, .. } => PacketCenter::Plane { t0, theta, eta, orientation: o },
    }
}

/// Crossing pair H₁ (o = +1), H₂ (o = −1), then m − 2 auxiliary unit-peak packets at τ₀.
pub fn probe_packets(center: PacketCenter, m: usize, tau: f64, alpha: f64) -> Vec<PacketSpec> {
    let w = 0.5 * alpha;
    let mut v = vec![
        PacketSpec { tau, alpha, smooth_width: w, center: with_orientation(center, 1), unit_peak: false },
        PacketSpec { tau, alpha, smooth_width: w, center: with_orientation(center, -1), unit_peak: false },
    ];
    for _ in 2..m {
        v.push(PacketSpec { tau: AUX_TAU, alpha, smooth_width: w, center: with_orientation(center, 1), unit_peak: true });
    }
    v
}

fn probe_estimate(
    oracle: &dyn DnOracle,
    center: PacketCenter,
    sched: &ScheduleParams,
    mf: &MeasurementFunction,
    alpha: Option<f64>,
) -> Result<Estimate> {
    let grid = oracle.grid();
    mf.psi().check_grid(grid)?;
    let alpha = alpha.unwrap_or_else(|| default_packet_alpha(grid, center));
    let limit = max_packet_alpha(grid, center);
    if !(alpha > 0.0) || 1.5 * alpha > limit * (1.0 + 1e-12) {
        return Err(Error::GeometryViolation(format!(
            "packet cutoff {alpha} (taper {}) does not vanish on the boundary at t = 0; need 1.5·alpha <= {limit}",
            0.5 * alpha
        )));
    }
    let m = sched.m as usize;
    let traces = probe_packets(center, m, sched.tau, alpha)
        .iter()
        .map(|p| packet_trace(p, grid))
        .collect::<Result<Vec<_>>>()?;
    let st = AmplitudeStencil::uniform(m, sched.eps)?;
    let bf = mixed_difference_par(&st, |amps| {
        let f = vertex_data(&traces, amps)?;
        lateral_inner_product(mf.psi(), &oracle.neumann(&f)?)
    })?;
    Ok(Estimate {
        value: bf / (factorial(m) * PI),
        tau: sched.tau,
        eps: sched.eps,
        alpha,
        boundary_functional: bf,
    })
}

fn check_time(mf: &MeasurementFunction, t0: f64) -> Result<()> {
    let (t1, t2) = mf.plateau_times();
    let tol = 1e-12 * mf.grid().final_time();
    if t0 < t1 - tol || t0 > t2 + tol {
        return Err(Error::OutOfPlateau(format!("t0 = {t0} outside [{t1}, {t2}]")));
    }
    Ok(())
}

/// Estimate of a(x₀, t₀) in 1+1 dimensions. `alpha` defaults to `default_packet_alpha`.
pub fn reconstruct_point_1d(
    oracle: &dyn DnOracle,
    x0: f64,
    t0: f64,
    sched: &ScheduleParams,
    mf: &MeasurementFunction,
    alpha: Option<f64>,
) -> Result<Estimate> {
    let grid = oracle.grid();
    if grid.dim() != 1 {
        return Err(Error::DimensionUnsupported(grid.dim()));
    }
    if x0 < grid.lower(0) || x0 > grid.upper(0) {
        return Err(Error::OutOfPlateau(format!("x0 = {x0} outside Ω")));
    }
    check_time(mf, t0)?;
    probe_estimate(oracle, PacketCenter::Point { x0, t0, orientation: 1 }, sched, mf, alpha)
}

/// Estimate of ℛ(a)(t₀, θ, η) in 2+1 dimensions, lines taken relative to the box centre.
pub fn reconstruct_radon_2d(
    oracle: &dyn DnOracle,
    t0: f64,
    theta: [f64; 2],
    eta: f64,
    sched: &ScheduleParams,
    mf: &MeasurementFunction,
    alpha: Option<f64>,
) -> Result<Estimate> {
    let grid = oracle.grid();
    if grid.dim() != 2 {
        return Err(Error::DimensionUnsupported(grid.dim()));
    }
    if eta.abs() > 0.5 * grid.diameter() {
        return Err(Error::OutOfPlateau(format!("line offset {eta} misses Ω")));
    }
    check_time(mf, t0)?;
    probe_estimate(oracle, PacketCenter::Plane { t0, theta, eta, orientation: 1 }, sched, mf, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Query {
    Point { x0: f64, t0: f64 },
    Line { t0: f64, theta: [f64; 2], eta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub queries: Vec<Query>,
    pub estimates: Vec<Estimate>,
    pub truth: Option<Vec<f64>>,
    /// max |â − a| over the queries when the truth is known.
    pub sup_error: Option<f64>,
}

impl ReconstructionResult {
    pub fn new(queries: Vec<Query>, estimates: Vec<Estimate>, truth: Option<Vec<f64>>) -> Result<Self> {
        if estimates.len() != queries.len() {
            return Err(Error::SizeMismatch { expected: queries.len(), got: estimates.len() });
        }
        let sup_error = match &truth {
            Some(t) => {
                if t.len() != queries.len() {
                    return Err(Error::SizeMismatch { expected: queries.len(), got: t.len() });
                }
                Some(estimates.iter().zip(t).map(|(e, a)| (e.value - a).abs()).fold(0.0, f64::max))
            }
            None => None,
        };
        Ok(ReconstructionResult { queries, estimates, truth, sup_error })
    }
}

/// a(x, y, t) interpolated from the sampled potential.
pub fn potential_at(a: &Potential, x: f64, y: f64, t: f64) -> f64 {
    a.slice_at(t).interpolate(x, y)
}

/// Point estimates at each (x₀, t₀), in parallel; results keep the input order.
pub fn reconstruct_points_1d(
    oracle: &dyn DnOracle,
    points: &[[f64; 2]],
    sched: &ScheduleParams,
    mf: &MeasurementFunction,
    alpha: Option<f64>,
    truth: Option<&Potential>,
) -> Result<ReconstructionResult> {
    let estimates = points
        .par_iter()
        .map(|p| reconstruct_point_1d(oracle, p[0], p[1], sched, mf, alpha))
        .collect::<Result<Vec<_>>>()?;
    let queries = points.iter().map(|p| Query::Point { x0: p[0], t0: p[1] }).collect();
    let truth = truth.map(|a| points.iter().map(|p| potential_at(a, p[0], 0.0, p[1])).collect());
    ReconstructionResult::new(queries, estimates, truth)
}

#[derive(Debug, Clone)]
pub struct FieldReconstruction {
    /// Line estimates on the requested (θ, η) samples.
    pub radon: RadonData,
    /// FBP of the estimates resampled to the η spacing of `default_offsets`.
    pub field: SpatialField,
}

/// Catmull-Rom resampling of every row onto `etas`; zero outside the sampled range.
pub fn resample_offsets(rd: &RadonData, etas: Vec<f64>) -> Result<RadonData> {
    let h = rd.eta_step()?;
    let ne = rd.n_etas();
    if ne < 2 {
        return Err(Error::InvalidParameter("need at least two offsets".into()));
    }
    let e0 = rd.etas[0];
    let mut out = RadonData::zeros(rd.t0, rd.thetas.clone(), etas);
    let nf = out.n_etas();
    for a in 0..rd.n_angles() {
        let row = rd.row(a);
        let at = |i: i64| if i < 0 || i >= ne as i64 { 0.0 } else { row[i as usize] };
        for (e, eta) in out.etas.clone().iter().enumerate() {
            let u = (eta - e0) / h;
            if u < -1e-9 || u > (ne - 1) as f64 + 1e-9 {
                continue;
            }
            let i = (u.floor() as i64).clamp(0, ne as i64 - 2);
            let s = u - i as f64;
            let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
            out.values[a * nf + e] = 0.5
                * (2.0 * p1
                    + (p2 - p0) * s
                    + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s * s
                    + (3.0 * p1 - p0 - 3.0 * p2 + p3) * s * s * s);
        }
    }
    Ok(out)
}

/// Line estimates over all (θ, η) pairs, then filtered back-projection.
pub fn reconstruct_field_2d(
    oracle: &dyn DnOracle,
    t0: f64,
    sched: &ScheduleParams,
    mf: &MeasurementFunction,
    thetas: &[[f64; 2]],
    offsets: &[f64],
    alpha: Option<f64>,
) -> Result<FieldReconstruction> {
    if thetas.len() < MIN_ANGLES {
        return Err(Error::InsufficientAngles { got: thetas.len(), needed: MIN_ANGLES });
    }
    let grid = oracle.grid();
    let mut radon = RadonData::zeros(t0, thetas.to_vec(), offsets.to_vec());
    radon.eta_step()?;
    let ne = offsets.len();
    radon.values = (0..thetas.len() * ne)
        .into_par_iter()
        .map(|k| reconstruct_radon_2d(oracle, t0, thetas[k / ne], offsets[k % ne], sched, mf, alpha).map(|e| e.value))
        .collect::<Result<Vec<_>>>()?;
    let fine = if radon.eta_step()? > grid.dx_min() {
        resample_offsets(&radon, default_offsets(grid))?
    } else {
        radon.clone()
    };
    let field = invert_radon(&fine, grid)?;
    Ok(FieldReconstruction { radon, field })
}

// ---------------------------------------------------------------------------------------
// Stability sweep

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Truth potential (1+1 dimensions).
    pub potential: Potential,
    pub s: f64,
    pub kappa: f64,
    pub big_m: f64,
    pub noise_kind: NoiseKind,
    pub r: u32,
    pub seed: u64,
    /// Query points (x₀, t₀).
    pub points: Vec<[f64; 2]>,
    pub alpha: Option<f64>,
    /// Taper width of v₀.
    pub smooth_width: f64,
    pub picard: PicardSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub deltas: Vec<f64>,
    pub sup_errors: Vec<f64>,
    pub taus: Vec<f64>,
    pub eps: Vec<f64>,
    /// Least-squares slope of log sup_error against log δ.
    pub slope: f64,
    /// 95% Student-t interval of the slope.
    pub slope_ci: [f64; 2],
    /// σ(s) the slope is compared against.
    pub sigma: f64,
}

/// One sweep entry: schedule for δ, then reconstruction with noise at level δ (or none).
pub fn sweep_entry(config: &SweepConfig, delta: f64, noisy: bool) -> Result<(ScheduleParams, ReconstructionResult)> {
    let a = &config.potential;
    let grid = a.grid();
    if grid.dim() != 1 {
        return Err(Error::DimensionUnsupported(grid.dim()));
    }
    let sched = schedule_parameters(delta, config.kappa, config.big_m, config.s, a.m(), 1)?;
    let noise = if noisy {
        NoiseModel::new(config.noise_kind, delta, config.r, config.seed)?
    } else {
        NoiseModel::none()
    };
    let oracle = SimulatedDn::new(a.clone(), config.picard).with_noise(noise);
    let mf = measurement_function(grid, &a.window(), [1.0, 0.0], config.smooth_width)?;
    let res = reconstruct_points_1d(&oracle, &config.points, &sched, &mf, config.alpha, Some(a))?;
    Ok((sched, res))
}

/// Slope of log y against log x with a 95% confidence interval (needs at least 3 points).
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<(f64, [f64; 2])> {
    if x.len() != y.len() {
        return Err(Error::SizeMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 3 {
        return Err(Error::InvalidSweep("a slope interval needs at least 3 points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidSweep("log-log fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 2.0)
        .map_err(|e| Error::InvalidSweep(e.to_string()))?
        .inverse_cdf(0.975);
    Ok((slope, [slope - t * se, slope + t * se]))
}

/// Sup error over the configured points for each δ, and the fitted Hölder slope.
pub fn stability_sweep(config: &SweepConfig, deltas: &[f64]) -> Result<SweepRecord> {
    if deltas.len() < 4 {
        return Err(Error::InvalidSweep(format!("need at least 4 deltas, got {}", deltas.len())));
    }
    if deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidSweep("deltas must be strictly decreasing".into()));
    }
    if deltas[0] / deltas[deltas.len() - 1] < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidSweep("deltas must span at least two decades".into()));
    }
    if config.points.is_empty() {
        return Err(Error::InvalidSweep("no query points".into()));
    }
    let mut rec = SweepRecord {
        deltas: deltas.to_vec(),
        sup_errors: Vec::new(),
        taus: Vec::new(),
        eps: Vec::new(),
        slope: 0.0,
        slope_ci: [0.0; 2],
        sigma: stability_exponent(config.s, config.potential.m(), 1),
    };
    for &d in deltas {
        let (sched, res) = sweep_entry(config, d, true)?;
        rec.sup_errors.push(res.sup_error.expect("truth is supplied"));
        rec.taus.push(sched.tau);
        rec.eps.push(sched.eps);
    }
    let (slope, ci) = fit_loglog(deltas, &rec.sup_errors)?;
    rec.slope = slope;
    rec.slope_ci = ci;
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::AdmissibleWindow;
    use crate::grid::GridSpec;
    use crate::radon::uniform_directions;
    use proptest::prelude::*;

    #[test]
    fn schedule_example_values() {
        // γ₀δ = 1e−6 with κ = 0.3, M = 1.
        let delta = 1e-6 / 0.027;
        let s = schedule_parameters(delta, 0.3, 1.0, 0.0, 2, 1).unwrap();
        assert!((s.gamma0 * s.delta - 1e-6).abs() < 1e-18);
        assert_eq!(s.s_hat, 3.0);
        let tau = 3f64.powf(-0.4) * 1e-6f64.powf(-2.0 / 15.0);
        let eps = 3f64.powf(0.4) * 1e-6f64.powf(7.0 / 15.0);
        assert!((s.tau - tau).abs() < 1e-12 * tau && (s.eps - eps).abs() < 1e-12 * eps);
        assert!((s.tau - 4.066).abs() < 5e-4, "{}", s.tau);
        assert!((s.eps - 2.46e-3).abs() < 5e-6, "{}", s.eps);
        assert!((s.sigma - 1.0 / 15.0).abs() < 1e-15);
        assert!((stability_exponent(0.0, 2, 2) - 1.0 / 60.0).abs() < 1e-15);
    }

    #[test]
    fn schedule_errors() {
        assert!(matches!(schedule_parameters(0.5, 0.9, 1.0, 0.0, 2, 1), Err(Error::TauBelowOne(_))));
        assert!(matches!(schedule_parameters(1.0, 0.3, 1.0, 0.0, 2, 1), Err(Error::DeltaOutOfRange { .. })));
        assert!(matches!(schedule_parameters(0.0, 0.3, 1.0, 0.0, 2, 1), Err(Error::DeltaOutOfRange { .. })));
    }

    proptest! {
        #[test]
        fn schedule_consistency_and_side_condition(ld in -8.0f64..-1.0, m in 2u32..6, s in 0u32..3) {
            let delta = 10f64.powf(ld);
            let p = schedule_parameters(delta, 0.3, 1.0, s as f64, m, 1).unwrap();
            let k = 2.0 * m as f64 - 1.0;
            let lhs = p.eps * p.tau.powf(p.s_hat / k);
            let rhs = (p.gamma0 * delta).powf(1.0 / k);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
            prop_assert!(p.eps * p.tau.powf((s as f64 + 2.0) / 2.0) <= p.kappa);
        }

        #[test]
        fn schedule_is_a_minimum(ld in -8.0f64..-1.0, m in 2u32..5) {
            let p = schedule_parameters(10f64.powf(ld), 0.3, 1.0, 0.0, m, 1).unwrap();
            let best = p.optimum();
            for i in 0..50 {
                for j in 0..50 {
                    let fe = 4f64.powf(-1.0 + 2.0 * i as f64 / 49.0);
                    let ft = 4f64.powf(-1.0 + 2.0 * j as f64 / 49.0);
                    prop_assert!(best <= p.objective(p.eps * fe, p.tau * ft) * (1.0 + 1e-12));
                }
            }
        }
    }

    fn grid1(nx: usize, nt: usize, t: f64) -> Arc<Grid> {
        Arc::new(Grid::new(&GridSpec::interval(1.0, t, nx, nt)).unwrap())
    }

    fn signal(g: &Arc<Grid>, c: f64) -> BoundarySignal {
        BoundarySignal::from_fn(g, SignalRole::Dirichlet, move |x, _, t| c * (t * (1.0 + x)).sin())
    }

    #[test]
    fn noise_models() {
        let g = grid1(21, 81, 3.5);
        let f = signal(&g, 1.0);
        assert!(make_noise(&NoiseModel::none(), &f).unwrap().is_zero());
        for kind in [NoiseKind::DeterministicProfile, NoiseKind::SeededRandomBandlimited] {
            for r in [0, 1, 2] {
                let model = NoiseModel::new(kind, 1e-3, r, 42).unwrap();
                let e = make_noise(&model, &f).unwrap();
                let norm = lateral_sobolev_norm(&e, r as f64).unwrap();
                assert!(norm <= 1e-3 * (1.0 + 1e-12) && norm > 0.0);
                let again = make_noise(&model, &f).unwrap();
                assert_eq!(e.values(), again.values());
            }
        }
        let rnd = NoiseModel::new(NoiseKind::SeededRandomBandlimited, 1e-3, 0, 42).unwrap();
        let e1 = make_noise(&rnd, &f).unwrap();
        assert!((lateral_sobolev_norm(&e1, 0.0).unwrap() - 1e-3).abs() < 1e-15);
        assert_ne!(e1.values(), make_noise(&rnd, &signal(&g, 2.0)).unwrap().values());
        assert_ne!(e1.values(), make_noise(&NoiseModel { seed: 43, ..rnd }, &f).unwrap().values());
        let det = NoiseModel::new(NoiseKind::DeterministicProfile, 1e-3, 0, 0).unwrap();
        let d1 = make_noise(&det, &f).unwrap();
        let d2 = make_noise(&det, &signal(&g, 2.0)).unwrap();
        assert!(d2.axpy(-2.0, &d1).unwrap().max_abs() > 1e-6);
    }

    fn setup(m: u32, amp: f64) -> (Arc<Grid>, Potential, MeasurementFunction) {
        let g = grid1(201, 801, 3.5);
        let w = AdmissibleWindow::with_default_lambda(&g).unwrap();
        let a = Potential::bump(&g, m, w, amp, [0.5, 0.0], 0.3, 1.75, 0.4).unwrap();
        let mf = measurement_function(&g, &w, [1.0, 0.0], 0.1).unwrap();
        (g, a, mf)
    }

    fn sched(m: u32, tau: f64, eps: f64) -> ScheduleParams {
        schedule_parameters(1e-3, 0.3, 1.0, 0.0, m, 1).unwrap().with_probe(tau, eps).unwrap()
    }

    #[test]
    fn zero_potential_reconstructs_zero() {
        let (_, a, mf) = setup(2, 0.0);
        let oracle = SimulatedDn::new(a, PicardSettings::default());
        let e = reconstruct_point_1d(&oracle, 0.5, 1.75, &sched(2, 100.0, 1e-2), &mf, None).unwrap();
        assert!(e.value.abs() < 1e-9, "{}", e.value);
    }

    #[test]
    fn point_estimate_improves_with_tau() {
        let (_, a, mf) = setup(2, 1.0);
        let truth = potential_at(&a, 0.5, 0.0, 1.75);
        let oracle = SimulatedDn::new(a, PicardSettings::default());
        let err: Vec<f64> = [25.0, 100.0, 400.0]
            .iter()
            .map(|&tau| (reconstruct_point_1d(&oracle, 0.5, 1.75, &sched(2, tau, 1e-2), &mf, None).unwrap().value - truth).abs())
            .collect();
        assert!(err[1] < err[0] && err[2] < err[1], "{err:?}");
        assert!(err[2] < 0.1 * truth, "{err:?} vs {truth}");
    }

    #[test]
    fn cubic_nonlinearity_uses_auxiliary_packets() {
        let (_, a, mf) = setup(3, 1.0);
        let truth = potential_at(&a, 0.5, 0.0, 1.75);
        let oracle = SimulatedDn::new(a, PicardSettings::default());
        let e = reconstruct_point_1d(&oracle, 0.5, 1.75, &sched(3, 400.0, 1e-2), &mf, None).unwrap();
        assert!((e.value - truth).abs() < 0.15 * truth, "{} vs {truth}", e.value);
    }

    #[test]
    fn oracles_agree_bitwise() {
        let (g, a, mf) = setup(2, 1.0);
        let sc = sched(2, 100.0, 1e-2);
        let noise = NoiseModel::new(NoiseKind::SeededRandomBandlimited, 1e-6, 0, 7).unwrap();
        let o1 = SimulatedDn::new(a.clone(), PicardSettings::default()).with_noise(noise);
        let o2 = SimulatedDn::new(a.clone(), PicardSettings::default()).with_noise(noise);
        let e1 = reconstruct_point_1d(&o1, 0.5, 1.75, &sc, &mf, None).unwrap();
        let e2 = reconstruct_point_1d(&o2, 0.5, 1.75, &sc, &mf, None).unwrap();
        assert_eq!(e1.value.to_bits(), e2.value.to_bits());

        let alpha = e1.alpha;
        let traces: Vec<BoundarySignal> = probe_packets(PacketCenter::Point { x0: 0.5, t0: 1.75, orientation: 1 }, 2, 100.0, alpha)
            .iter()
            .map(|p| packet_trace(p, &g).unwrap())
            .collect();
        let st = AmplitudeStencil::uniform(2, 1e-2).unwrap();
        let inputs: Vec<BoundarySignal> = (0..4).map(|k| vertex_data(&traces, &st.amplitudes(k)).unwrap()).collect();
        let tab = TabulatedDn::record(&o1, &inputs).unwrap();
        assert_eq!(tab.len(), 4);
        let e3 = reconstruct_point_1d(&tab, 0.5, 1.75, &sc, &mf, None).unwrap();
        assert_eq!(e1.value.to_bits(), e3.value.to_bits());
        assert!(tab.neumann(&signal(&g, 1.0)).is_err());
    }

    #[test]
    fn plateau_and_geometry_checks() {
        let (_, a, mf) = setup(2, 1.0);
        let oracle = SimulatedDn::new(a, PicardSettings::default());
        let sc = sched(2, 100.0, 1e-2);
        assert!(matches!(reconstruct_point_1d(&oracle, 0.5, 0.5, &sc, &mf, None), Err(Error::OutOfPlateau(_))));
        assert!(matches!(reconstruct_point_1d(&oracle, 1.5, 1.75, &sc, &mf, None), Err(Error::OutOfPlateau(_))));
        assert!(matches!(
            reconstruct_point_1d(&oracle, 0.5, 1.75, &sc, &mf, Some(2.0)),
            Err(Error::GeometryViolation(_))
        ));
    }

    #[test]
    fn identity_with_zero_potential() {
        let (g, a, mf) = setup(2, 0.0);
        let p = probe_packets(PacketCenter::Point { x0: 0.5, t0: 1.75, orientation: 1 }, 2, 100.0, 0.5);
        let t = integral_identity_eval(&g, &a, &mf, &p, &[1e-2, 1e-2], &PicardSettings::default()).unwrap();
        assert_eq!(t.lhs, 0.0);
        assert!(t.boundary_term.abs() < 1e-9 && t.remainder_term.abs() < 1e-9, "{t:?}");
    }

    #[test]
    fn identity_closes() {
        let (g, a, mf) = setup(2, 1.0);
        let p = probe_packets(PacketCenter::Point { x0: 0.5, t0: 1.75, orientation: 1 }, 2, 100.0, 0.5);
        let s = PicardSettings { tol_rel: 1e-13, max_iter: 60 };
        let t = integral_identity_eval(&g, &a, &mf, &p, &[1e-2, 1e-2], &s).unwrap();
        assert!(t.lhs > 0.0);
        assert!(t.closure().abs() < 1e-2 * t.lhs, "{t:?}");
        assert!(t.residual().abs() < 0.1 * t.lhs, "{t:?}");
    }

    #[test]
    fn loglog_fit() {
        let x = [1e-2, 1e-3, 1e-4, 1e-5];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.2)).collect();
        let (s, ci) = fit_loglog(&x, &y).unwrap();
        assert!((s - 0.2).abs() < 1e-12 && ci[0] <= s && s <= ci[1]);
        assert!(fit_loglog(&x[..2], &y[..2]).is_err());
    }

    #[test]
    fn sweep_preconditions() {
        let (_, a, _) = setup(2, 1.0);
        let cfg = SweepConfig {
            potential: a,
            s: 0.0,
            kappa: 0.3,
            big_m: 1.0,
            noise_kind: NoiseKind::SeededRandomBandlimited,
            r: 0,
            seed: 1,
            points: vec![[0.5, 1.75]],
            alpha: None,
            smooth_width: 0.1,
            picard: PicardSettings::default(),
        };
        for d in [&[1e-2, 1e-3, 1e-3, 1e-5][..], &[1e-5, 1e-4, 1e-3, 1e-2], &[1e-2, 1e-3, 1e-4], &[1e-2, 9e-3, 8e-3, 7e-3]] {
            assert!(matches!(stability_sweep(&cfg, d), Err(Error::InvalidSweep(_))));
        }
    }

    #[test]
    fn catmull_rom_reproduces_lines() {
        let thetas = uniform_directions(2);
        let etas: Vec<f64> = (0..9).map(|k| -0.4 + 0.1 * k as f64).collect();
        let mut rd = RadonData::zeros(1.0, thetas, etas.clone());
        for a in 0..2 {
            for (e, eta) in etas.iter().enumerate() {
                rd.values[a * 9 + e] = 1.0 + 2.0 * eta;
            }
        }
        let fine: Vec<f64> = (0..33).map(|k| -0.3 + 0.6 * k as f64 / 32.0).collect();
        let out = resample_offsets(&rd, fine.clone()).unwrap();
        for (e, eta) in fine.iter().enumerate() {
            assert!((out.at(1, e) - (1.0 + 2.0 * eta)).abs() < 1e-12);
        }
        let wide = resample_offsets(&rd, vec![-0.6, 0.6]).unwrap();
        assert_eq!(wide.values, vec![0.0; 4]);
    }

    fn grid2() -> Arc<Grid> {
        Arc::new(Grid::new(&GridSpec::square(1.0, 4.0, 41, 261)).unwrap())
    }

    #[test]
    fn radon_line_missing_support_is_small() {
        let g = grid2();
        let w = AdmissibleWindow::with_default_lambda(&g).unwrap();
        let t0 = 0.5 * (w.t1 + w.t2);
        let a = Potential::bump(&g, 2, w, 1.0, [0.5, 0.5], 0.15, t0, 0.3).unwrap();
        let mf = measurement_function(&g, &w, [1.0, 0.0], 0.05).unwrap();
        let oracle = SimulatedDn::new(a, PicardSettings::default());
        let sc = sched(2, 64.0, 1e-2);
        let hit = reconstruct_radon_2d(&oracle, t0, [1.0, 0.0], 0.0, &sc, &mf, None).unwrap();
        let miss = reconstruct_radon_2d(&oracle, t0, [1.0, 0.0], 0.45, &sc, &mf, None).unwrap();
        assert!(hit.value > 0.0);
        assert!(miss.value.abs() < 1e-3 * hit.value, "{} vs {}", miss.value, hit.value);
        assert!(matches!(
            reconstruct_radon_2d(&oracle, t0, [1.0, 0.0], 0.9, &sc, &mf, None),
            Err(Error::OutOfPlateau(_))
        ));
    }

    #[test]
    fn field_needs_angles_and_zero_gives_zero() {
        let g = grid2();
        let w = AdmissibleWindow::with_default_lambda(&g).unwrap();
        let t0 = 0.5 * (w.t1 + w.t2);
        let a = Potential::zero(&g, 2, w).unwrap();
        let mf = measurement_function(&g, &w, [1.0, 0.0], 0.05).unwrap();
        let oracle = SimulatedDn::new(a, PicardSettings::default());
        let sc = sched(2, 64.0, 1e-2);
        let offs = [-0.4, -0.2, 0.0, 0.2, 0.4];
        assert!(matches!(
            reconstruct_field_2d(&oracle, t0, &sc, &mf, &uniform_directions(60), &offs, None),
            Err(Error::InsufficientAngles { .. })
        ));
        let r = reconstruct_field_2d(&oracle, t0, &sc, &mf, &uniform_directions(120), &offs, None).unwrap();
        assert!(r.radon.max_abs() < 1e-9 && r.field.max_abs() < 1e-8);
    }
}
