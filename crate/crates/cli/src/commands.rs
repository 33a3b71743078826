//! The subcommands. Each one reads the validated setup, computes, and hands every artefact
//! to the single `Output` writer.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use waveinv_core::findiff::{mixed_difference, multinomial_identity, AmplitudeStencil};
use waveinv_core::forward::{dn_map_with, solve_semilinear, AdmissibleWindow, ForwardSummary, Potential};
use waveinv_core::inversion::{
    fit_loglog, integral_identity_eval, make_noise, probe_packets, reconstruct_field_2d, reconstruct_points_1d,
    schedule_parameters, stability_sweep, IdentityTerms, NoiseKind, NoiseModel,
    ReconstructionResult, ScheduleParams, SimulatedDn, SweepConfig,
};
use waveinv_core::probes::{default_packet_alpha, measurement_function, PacketCenter};
use waveinv_core::radon::{default_offsets, fourier_slice_check, invert_radon, partial_radon, uniform_directions, MIN_ANGLES};
use waveinv_core::wave::{energy_norm, lateral_inner_product, lateral_sobolev_norm, solve_linear_wave};
use waveinv_core::{BoundarySignal, Error as CoreError, FieldRole, Grid, GridSpec, SignalRole, SpaceTimeField, SpatialField};

use crate::binfmt::{Array, Role};
use crate::config::{ExperimentConfig, Setup};
use crate::output::Output;
use crate::plot::{export_plot, Plot, Series};

/// Anything that can stop a subcommand after the configuration was accepted.
#[derive(Debug)]
pub enum RunError {
    Core(CoreError),
    Io(std::io::Error),
    Plot(crate::plot::PlotError),
    Usage(String),
    /// Selftest finished but some checks failed.
    ChecksFailed(usize),
}

impl RunError {
    pub fn kind(&self) -> String {
        match self {
            RunError::Core(e) => e.kind().to_string(),
            RunError::Io(_) => "Io".into(),
            RunError::Plot(_) => "EmptySeries".into(),
            RunError::Usage(_) => "Usage".into(),
            RunError::ChecksFailed(_) => "ChecksFailed".into(),
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
            RunError::Plot(e) => write!(f, "{e}"),
            RunError::Usage(m) => write!(f, "{m}"),
            RunError::ChecksFailed(n) => write!(f, "{n} selftest check(s) failed"),
        }
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        RunError::Core(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<crate::plot::PlotError> for RunError {
    fn from(e: crate::plot::PlotError) -> Self {
        RunError::Plot(e)
    }
}

type Res = std::result::Result<(), RunError>;

/// Shortest round-trip form; scientific notation away from order one.
fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn space_time_array(u: &SpaceTimeField) -> Array {
    let g = u.grid();
    let mut axes = vec![(g.final_time(), g.nt() as u64)];
    if g.dim() == 2 {
        axes.push((g.extent(1), g.nx() as u64));
    }
    axes.push((g.extent(0), g.nx() as u64));
    Array { role: Role::SpaceTime, axes, data: u.values().to_vec() }
}

fn boundary_array(s: &BoundarySignal) -> Array {
    let g = s.grid();
    let len: f64 = g.boundary_nodes().iter().map(|b| b.weight).sum();
    Array {
        role: Role::Boundary,
        axes: vec![(g.final_time(), g.nt() as u64), (len, g.boundary_count() as u64)],
        data: s.values().to_vec(),
    }
}

fn spatial_array(f: &SpatialField) -> Array {
    let g = f.grid();
    let mut axes = Vec::new();
    if g.dim() == 2 {
        axes.push((g.extent(1), g.nx() as u64));
    }
    axes.push((g.extent(0), g.nx() as u64));
    Array { role: Role::Spatial, axes, data: f.values().to_vec() }
}

/// A·sin⁴(π(t − start)/duration) on every lateral node.
pub fn pulse_data(grid: &Arc<Grid>, cfg: &ExperimentConfig) -> BoundarySignal {
    let d = cfg.data.clone();
    BoundarySignal::from_fn(grid, SignalRole::Dirichlet, move |_, _, t| {
        let s = (t - d.start) / d.duration;
        if s > 0.0 && s < 1.0 {
            d.amplitude * (PI * s).sin().powi(4)
        } else {
            0.0
        }
    })
}

fn picard_rows(history: &[f64]) -> Vec<Vec<String>> {
    history.iter().enumerate().map(|(k, r)| vec![(k + 1).to_string(), num(*r)]).collect()
}

pub fn forward(cfg: &ExperimentConfig, st: &Setup, out: &mut Output) -> Res {
    let f = pulse_data(&st.grid, cfg);
    let tol = st.picard.tolerance(&f)?;
    let (u, report) = solve_semilinear(&st.grid, &st.potential, &f, tol, st.picard.max_iter)?;
    let summary = ForwardSummary {
        energy_e1: energy_norm(&u, 1)?,
        data_norm: lateral_sobolev_norm(&f, cfg.s + 1.0)?,
        report: report.clone(),
    };
    out.array("u.bin", &space_time_array(&u))?;
    out.csv("picard.csv", &["iteration", "residual"], &picard_rows(&report.residual_history))?;
    out.json("forward.json", &summary)?;
    out.task("forward", true, None);
    Ok(())
}

#[derive(Serialize)]
struct DnSummary {
    neumann_l2: f64,
    instrument_reading: f64,
    noise_delta: f64,
    report: waveinv_core::forward::PicardReport,
}

pub fn dn(cfg: &ExperimentConfig, st: &Setup, out: &mut Output) -> Res {
    let f = pulse_data(&st.grid, cfg);
    let (clean, report) = dn_map_with(&st.grid, &st.potential, &f, &st.picard)?;
    let delta = if cfg.noise.kind == NoiseKind::None { 0.0 } else { cfg.schedule.deltas.first().copied().unwrap_or(0.0) };
    let g = clean.axpy(1.0, &make_noise(&cfg.noise_model(delta)?, &f)?)?;
    let grid = &st.grid;
    let nb = grid.boundary_count();
    let mut rows = Vec::with_capacity(nb * grid.nt());
    for n in 0..grid.nt() {
        for (b, bn) in grid.boundary_nodes().iter().enumerate() {
            let p = grid.node_coords(bn.node);
            rows.push(vec![
                n.to_string(),
                num(grid.time(n)),
                b.to_string(),
                num(p[0]),
                num(p[1]),
                num(f.at(n, b)),
                num(g.at(n, b)),
            ]);
        }
    }
    out.csv("dn.csv", &["level", "t", "boundary_node", "x", "y", "dirichlet", "neumann"], &rows)?;
    out.array("neumann.bin", &boundary_array(&g))?;
    out.json(
        "dn.json",
        &DnSummary {
            neumann_l2: lateral_sobolev_norm(&g, 0.0)?,
            instrument_reading: lateral_inner_product(st.mf.psi(), &g)?,
            noise_delta: delta,
            report,
        },
    )?;
    out.task("dn", true, None);
    Ok(())
}

fn mid_window(w: &AdmissibleWindow) -> f64 {
    0.5 * (w.t1 + w.t2)
}

/// Query centre for single-probe subcommands: the first configured point, else the box
/// centre at mid-window (a line through the centre with θ = e₁ in 2D).
fn probe_center(cfg: &ExperimentConfig, st: &Setup) -> PacketCenter {
    let t0 = cfg.reconstruction.t0.unwrap_or_else(|| mid_window(&st.window));
    if st.grid.dim() == 1 {
        let p = cfg.reconstruction.points.first().copied().unwrap_or([st.grid.center()[0], t0]);
        PacketCenter::Point { x0: p[0], t0: p[1], orientation: 1 }
    } else {
        PacketCenter::Plane { t0, theta: [1.0, 0.0], eta: 0.0, orientation: 1 }
    }
}

#[derive(Serialize)]
struct IdentityRow {
    eps: f64,
    #[serde(flatten)]
    terms: IdentityTerms,
    residual: f64,
    closure: f64,
}

#[derive(Serialize)]
struct IdentitySummary {
    tau: f64,
    center: PacketCenter,
    rows: Vec<IdentityRow>,
    /// Log-log slope of |lhs − boundary_term| against ε.
    residual_slope: Option<f64>,
}

pub fn identity(cfg: &ExperimentConfig, st: &Setup, out: &mut Output) -> Res {
    let center = probe_center(cfg, st);
    let alpha = cfg.reconstruction.alpha.unwrap_or_else(|| default_packet_alpha(&st.grid, center));
    let packets = probe_packets(center, cfg.m as usize, cfg.identity.tau, alpha);
    let mut rows = Vec::new();
    for &e in &cfg.identity.eps {
        let eps = vec![e; cfg.m as usize];
        let terms = integral_identity_eval(&st.grid, &st.potential, &st.mf, &packets, &eps, &st.picard)?;
        rows.push(IdentityRow { eps: e, terms, residual: terms.residual(), closure: terms.closure() });
    }
    let pts: Vec<[f64; 2]> = rows.iter().map(|r| [r.eps, r.residual.abs()]).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p[1]).collect();
    let residual_slope = fit_loglog(&cfg.identity.eps, &ys).ok().map(|(s, _)| s);
    let csv: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![num(r.eps), num(r.terms.lhs), num(r.terms.boundary_term), num(r.terms.remainder_term), num(r.residual), num(r.closure)]
        })
        .collect();
    out.csv("identity.csv", &["eps", "lhs", "boundary_term", "remainder_term", "residual", "closure"], &csv)?;
    out.svg(
        "identity.svg",
        &export_plot(&Plot::LogLog {
            series: vec![Series { label: "|lhs - boundary term|".into(), points: pts }],
            x_label: "epsilon".into(),
            y_label: "residual".into(),
        })?,
    )?;
    out.json("identity.json", &IdentitySummary { tau: cfg.identity.tau, center, rows, residual_slope })?;
    out.task("identity", true, None);
    Ok(())
}

/// Schedule for the first δ with its noise model, or the fixed (τ, ε) of the configuration
/// without noise.
pub fn schedule_and_noise(cfg: &ExperimentConfig) -> Result<(ScheduleParams, NoiseModel), RunError> {
    let delta = *cfg.schedule.deltas.first().ok_or_else(|| RunError::Usage("schedule.deltas is empty".into()))?;
    let sc = &cfg.schedule;
    let sched = schedule_parameters(delta, sc.kappa, sc.big_m, cfg.s, cfg.m, cfg.domain.n)?;
    match cfg.reconstruction.tau {
        Some(tau) => Ok((sched.with_probe(tau, cfg.reconstruction.eps.unwrap_or(sched.eps))?, NoiseModel::none())),
        None => Ok((sched, cfg.noise_model(delta)?)),
    }
}

#[derive(Serialize)]
struct PointReport<'a> {
    schedule: ScheduleParams,
    noise: NoiseModel,
    result: &'a ReconstructionResult,
}

#[derive(Serialize)]
struct FieldReport {
    schedule: ScheduleParams,
    noise: NoiseModel,
    t0: f64,
    angles: usize,
    offsets: Vec<f64>,
    relative_l2_error: f64,
    sup_error: f64,
}

fn truth_slice(a: &Potential, t0: f64) -> SpatialField {
    a.slice_at(t0)
}

fn heatmap(out: &mut Output, name: &str, title: &str, f: &SpatialField) -> Res {
    let g = f.grid();
    out.svg(name, &export_plot(&Plot::Heatmap { title: title.into(), nx: g.nx(), ny: g.nx(), values: f.values().to_vec() })?)?;
    Ok(())
}

pub fn reconstruct(cfg: &ExperimentConfig, st: &Setup, out: &mut Output) -> Res {
    let (sched, noise) = schedule_and_noise(cfg)?;
    let oracle = SimulatedDn::new(st.potential.clone(), st.picard).with_noise(noise);
    let alpha = cfg.reconstruction.alpha;
    if st.grid.dim() == 1 {
        let points = if cfg.reconstruction.points.is_empty() {
            vec![[st.grid.center()[0], mid_window(&st.window)]]
        } else {
            cfg.reconstruction.points.clone()
        };
        let res = reconstruct_points_1d(&oracle, &points, &sched, &st.mf, alpha, Some(&st.potential))?;
        let truth = res.truth.clone().unwrap_or_default();
        let rows: Vec<Vec<String>> = res
            .estimates
            .iter()
            .zip(&points)
            .zip(&truth)
            .map(|((e, p), a)| vec![num(p[0]), num(p[1]), num(e.value), num(*a), num(e.value - a), num(e.tau), num(e.eps)])
            .collect();
        out.csv("reconstruct.csv", &["x0", "t0", "estimate", "truth", "error", "tau", "eps"], &rows)?;
        out.json("reconstruct.json", &PointReport { schedule: sched, noise, result: &res })?;
        out.task("reconstruct_points", true, None);
        return Ok(());
    }
    let t0 = cfg.reconstruction.t0.unwrap_or_else(|| mid_window(&st.window));
    let thetas = uniform_directions(cfg.reconstruction.angles);
    let offsets = line_offsets(cfg, &st.grid);
    let rec = reconstruct_field_2d(&oracle, t0, &sched, &st.mf, &thetas, &offsets, alpha)?;
    let truth = truth_slice(&st.potential, t0);
    let direct = partial_radon(&truth, t0, &thetas, &offsets)?;
    let mut rows = Vec::new();
    for (a, th) in thetas.iter().enumerate() {
        for (e, eta) in offsets.iter().enumerate() {
            rows.push(vec![num(th[1].atan2(th[0])), num(*eta), num(rec.radon.at(a, e)), num(direct.at(a, e))]);
        }
    }
    out.csv("radon_lines.csv", &["angle", "eta", "estimate", "truth"], &rows)?;
    let err = rec.field.axpy(-1.0, &truth)?;
    let rel = err.l2_norm() / truth.l2_norm().max(f64::MIN_POSITIVE);
    out.array("field.bin", &spatial_array(&rec.field))?;
    heatmap(out, "field_error.svg", "reconstruction minus truth", &err)?;
    out.json(
        "reconstruct.json",
        &FieldReport {
            schedule: sched,
            noise,
            t0,
            angles: thetas.len(),
            offsets,
            relative_l2_error: rel,
            sup_error: err.max_abs(),
        },
    )?;
    out.task("reconstruct_field", true, None);
    Ok(())
}

pub fn line_offsets(cfg: &ExperimentConfig, grid: &Grid) -> Vec<f64> {
    let r = cfg.reconstruction.offset_range.unwrap_or(0.5 * grid.diameter());
    let k = cfg.reconstruction.offsets.max(2);
    (0..k).map(|j| -r + 2.0 * r * j as f64 / (k - 1) as f64).collect()
}

pub fn sweep_config(cfg: &ExperimentConfig, st: &Setup) -> SweepConfig {
    let points = if cfg.reconstruction.points.is_empty() {
        vec![[st.grid.center()[0], mid_window(&st.window)]]
    } else {
        cfg.reconstruction.points.clone()
    };
    SweepConfig {
        potential: st.potential.clone(),
        s: cfg.s,
        kappa: cfg.schedule.kappa,
        big_m: cfg.schedule.big_m,
        noise_kind: cfg.noise.kind,
        r: cfg.noise.r,
        seed: cfg.noise.seed,
        points,
        alpha: cfg.reconstruction.alpha,
        smooth_width: st.mf.smooth_width(),
        picard: st.picard,
    }
}

pub fn sweep(cfg: &ExperimentConfig, st: &Setup, out: &mut Output) -> Res {
    let rec = stability_sweep(&sweep_config(cfg, st), &cfg.schedule.deltas)?;
    let rows: Vec<Vec<String>> = (0..rec.deltas.len())
        .map(|k| vec![num(rec.deltas[k]), num(rec.sup_errors[k]), num(rec.taus[k]), num(rec.eps[k])])
        .collect();
    out.csv("sweep.csv", &["delta", "sup_error", "tau", "eps"], &rows)?;
    out.json("sweep.json", &rec)?;
    let pts = rec.deltas.iter().zip(&rec.sup_errors).map(|(d, e)| [*d, *e]).collect();
    out.svg(
        "sweep.svg",
        &export_plot(&Plot::LogLog {
            series: vec![Series { label: "sup error".into(), points: pts }],
            x_label: "delta".into(),
            y_label: "sup |a_hat - a|".into(),
        })?,
    )?;
    out.task("sweep", true, None);
    Ok(())
}

#[derive(Serialize)]
struct RadonReport {
    t0: f64,
    angles: usize,
    offsets: usize,
    relative_l2_error: f64,
    slice_deviation_e1: f64,
}

pub fn radon(cfg: &ExperimentConfig, st: &Setup, out: &mut Output) -> Res {
    let t0 = cfg.reconstruction.t0.unwrap_or_else(|| mid_window(&st.window));
    let slice = truth_slice(&st.potential, t0);
    let thetas = uniform_directions(cfg.reconstruction.angles.max(MIN_ANGLES));
    let etas = default_offsets(&st.grid);
    let rd = partial_radon(&slice, t0, &thetas, &etas)?;
    let back = invert_radon(&rd, &st.grid)?;
    let err = back.axpy(-1.0, &slice)?;
    let rel = err.l2_norm() / slice.l2_norm().max(f64::MIN_POSITIVE);
    let slice_dev = if slice.max_abs() > 0.0 { fourier_slice_check(&slice, [1.0, 0.0])? } else { 0.0 };
    out.array(
        "sinogram.bin",
        &Array {
            role: Role::Sinogram,
            axes: vec![(PI, thetas.len() as u64), (etas[etas.len() - 1] - etas[0], etas.len() as u64)],
            data: rd.values.clone(),
        },
    )?;
    out.array("radon_inverse.bin", &spatial_array(&back))?;
    heatmap(out, "radon_error.svg", "FBP minus slice", &err)?;
    out.json(
        "radon.json",
        &RadonReport { t0, angles: thetas.len(), offsets: etas.len(), relative_l2_error: rel, slice_deviation_e1: slice_dev },
    )?;
    out.csv("radon.csv", &["t0", "angles", "offsets", "relative_l2_error"], &[vec![num(t0), thetas.len().to_string(), etas.len().to_string(), num(rel)]])?;
    out.task("radon", true, None);
    Ok(())
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    value: f64,
    tolerance: f64,
}

fn check(name: &'static str, value: f64, tolerance: f64) -> Check {
    Check { name, passed: value.is_finite() && value <= tolerance, value, tolerance }
}

/// Quick checks with known answers; the configuration only supplies one of them.
fn selftest_checks(cfg: &ExperimentConfig, st: &Setup) -> Result<Vec<Check>, RunError> {
    let mut out = Vec::new();

    // Quasi-random arguments in (−2, 2) from the golden-ratio sequence.
    let mut worst = 0.0f64;
    let mut u = 0.5f64;
    for m in 2..=5usize {
        for _ in 0..100 {
            let x: Vec<f64> = (0..m)
                .map(|_| {
                    u = (u + 0.618_033_988_749_895).fract();
                    4.0 * u - 2.0
                })
                .collect();
            let exact = (1..=m).map(|k| k as f64).product::<f64>() * x.iter().product::<f64>();
            let got = multinomial_identity(m, &x)?;
            worst = worst.max((got - exact).abs() / exact.abs().max(1e-300));
        }
    }
    out.push(check("multinomial_identity", worst, 1e-12));

    let s = schedule_parameters(1e-6 / 0.027, 0.3, 1.0, 0.0, 2, 1)?;
    out.push(check("schedule_tau_example", (s.tau - 4.066).abs(), 5e-4));
    out.push(check("schedule_eps_example", (s.eps - 2.46e-3).abs(), 5e-6));
    out.push(check("sigma_n1_m2_s0", (s.sigma - 1.0 / 15.0).abs(), 1e-15));

    let st_q = AmplitudeStencil::new(vec![0.1, 0.2])?;
    let d = mixed_difference(&st_q, |e| Ok((1.0 + e[0] + e[1]).powi(2)))?;
    out.push(check("mixed_difference_quadratic", (d - 2.0).abs(), 1e-12));

    // Free standing wave sin(πx)·sin(πt): second order in dx on three grids.
    let mut errs = Vec::new();
    for nx in [21usize, 41, 81] {
        let g = Arc::new(GridSpec::interval(1.0, 1.0, nx, 2 * (nx - 1) + 1).build()?);
        let zero = SpatialField::zeros(&g);
        let vel = SpatialField::from_fn(&g, |x, _| PI * (PI * x).sin());
        let u = solve_linear_wave(
            &g,
            &SpaceTimeField::zeros(&g, FieldRole::Source),
            &BoundarySignal::zeros(&g, SignalRole::Dirichlet),
            &zero,
            &vel,
        )?;
        let ex = SpaceTimeField::from_fn(&g, FieldRole::Solution, |x, _, t| (PI * x).sin() * (PI * t).sin());
        errs.push(u.axpy(-1.0, &ex)?.max_abs());
    }
    let ratio = (errs[0] / errs[1]).min(errs[1] / errs[2]);
    out.push(check("leapfrog_order_ratio_gap", (ratio - 4.0).abs(), 0.6));

    let f = pulse_data(&st.grid, cfg);
    let noise = NoiseModel::new(NoiseKind::SeededRandomBandlimited, 1e-3, 0, cfg.noise.seed)?;
    let e = make_noise(&noise, &f)?;
    out.push(check("noise_norm_excess", lateral_sobolev_norm(&e, 0.0)? - 1e-3 * (1.0 + 1e-12), 0.0));
    let e2 = make_noise(&noise, &f)?;
    out.push(check("noise_reproducible", if e.values() == e2.values() { 0.0 } else { 1.0 }, 0.0));

    // Zero potential in 1D: the reconstruction vanishes.
    let g = Arc::new(GridSpec::interval(1.0, 3.5, 101, 401).build()?);
    let w = AdmissibleWindow::with_default_lambda(&g)?;
    let a0 = Potential::zero(&g, 2, w)?;
    let mf = measurement_function(&g, &w, [1.0, 0.0], 0.05)?;
    let sc = s.with_probe(64.0, 1e-2)?;
    let oracle = SimulatedDn::new(a0, st.picard);
    let r = reconstruct_points_1d(&oracle, &[[0.5, 1.75]], &sc, &mf, None, None)?;
    out.push(check("zero_potential_estimate", r.estimates[0].value.abs(), 1e-9));

    // Line integral of a centred Gaussian e^{−|x|²/(2s²)} is s√(2π) for every direction.
    let g2 = Arc::new(GridSpec::square(2.0, 0.5, 257, 121).with_lower(&[-1.0, -1.0]).build()?);
    let sig = 0.15;
    let gauss = SpatialField::from_fn(&g2, |x, y| (-(x * x + y * y) / (2.0 * sig * sig)).exp());
    let rd = partial_radon(&gauss, 0.0, &uniform_directions(4), &[0.0])?;
    let exact = sig * (2.0 * PI).sqrt();
    let dev = rd.values.iter().map(|v| (v - exact).abs() / exact).fold(0.0, f64::max);
    out.push(check("radon_gaussian_line", dev, 1e-3));

    let cfg_ok = cfg.validate().is_ok();
    out.push(check("config_valid", if cfg_ok { 0.0 } else { 1.0 }, 0.0));

    let arr = Array { role: Role::Spatial, axes: vec![(1.0, 3)], data: vec![1.0, -0.5, 2.5e-17] };
    let back = crate::binfmt::decode(&crate::binfmt::encode(&arr)?[..])?;
    out.push(check("binary_round_trip", if back == arr { 0.0 } else { 1.0 }, 0.0));

    Ok(out)
}

pub fn selftest(cfg: &ExperimentConfig, st: &Setup, out: &mut Output) -> Res {
    let checks = selftest_checks(cfg, st)?;
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| vec![c.name.to_string(), if c.passed { "pass" } else { "fail" }.to_string(), num(c.value), num(c.tolerance)])
        .collect();
    out.csv("selftest.csv", &["check", "status", "value", "tolerance"], &rows)?;
    out.json("selftest.json", &checks)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    for c in &checks {
        out.task(c.name, c.passed, None);
    }
    if failed > 0 {
        return Err(RunError::ChecksFailed(failed));
    }
    Ok(())
}
