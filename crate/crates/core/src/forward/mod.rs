//! Semilinear forward problem □u + a uᵐ = 0 with Dirichlet data, its DN map and the
//! small-amplitude expansion of the solution.

mod picard;
mod potential;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BoundarySignal, FieldRole, SignalRole, SpaceTimeField};
use crate::grid::Grid;
use crate::wave::{lateral_inner_product, solve_free, solve_source};

pub use picard::{nonlinear_source, product_source, solve_semilinear, solve_semilinear_explicit, PicardReport, PicardSettings};
pub use potential::{unit_bump, AdmissibleWindow, IndexBox, Potential, SupportHint};

/// Neumann trace of the solution with data f, plus the Picard diagnostics.
///
/// Runs the fixed-point iteration in difference form on the support of a, so only the
/// trace is kept. Agrees with `normal_derivative(solve_semilinear(..))` to round-off.
pub fn dn_map_with(
    grid: &Arc<Grid>,
    a: &Potential,
    f: &BoundarySignal,
    settings: &PicardSettings,
) -> Result<(BoundarySignal, PicardReport)> {
    let tol = settings.tolerance(f)?;
    let out = picard::picard_windowed(grid, a, f, tol, settings.max_iter)?;
    Ok((out.trace, out.report))
}

/// Λ(f) = ∂_ν u on Σ with the default Picard settings.
pub fn dn_map(grid: &Arc<Grid>, a: &Potential, f: &BoundarySignal) -> Result<BoundarySignal> {
    dn_map_with(grid, a, f, &PicardSettings::default()).map(|(s, _)| s)
}

/// λ_ψ(f) = ⟨ψ, ∂_ν u_f⟩ on Σ.
pub fn instrument_measurement(psi: &BoundarySignal, neumann: &BoundarySignal) -> Result<f64> {
    lateral_inner_product(psi, neumann)
}

/// Pieces of u = Σ εⱼvⱼ + (multinomial part) + 𝓡.
#[derive(Debug, Clone)]
pub struct ExpansionTerms {
    /// Free waves with data fⱼ.
    pub linear: Vec<SpaceTimeField>,
    /// □w + a v₁⋯v_m = 0 with zero data.
    pub w_top: SpaceTimeField,
    /// Σ over |k| = m of the multinomial terms, i.e. S(−a(Σεⱼvⱼ)ᵐ).
    pub multinomial: SpaceTimeField,
    pub remainder: SpaceTimeField,
    pub solution: SpaceTimeField,
    pub report: PicardReport,
}

pub fn expansion_terms(
    grid: &Arc<Grid>,
    a: &Potential,
    packets: &[BoundarySignal],
    eps: &[f64],
    settings: &PicardSettings,
) -> Result<ExpansionTerms> {
    let m = a.m() as usize;
    if packets.len() != m {
        return Err(Error::SizeMismatch { expected: m, got: packets.len() });
    }
    if eps.len() != m {
        return Err(Error::SizeMismatch { expected: m, got: eps.len() });
    }
    let linear = packets.iter().map(|f| solve_free(grid, f)).collect::<Result<Vec<_>>>()?;
    let terms: Vec<(f64, &BoundarySignal)> = eps.iter().copied().zip(packets.iter()).collect();
    let f = BoundarySignal::combine(&terms, SignalRole::Dirichlet)?;
    let tol = settings.tolerance(&f)?;
    let (solution, report) = solve_semilinear(grid, a, &f, tol, settings.max_iter)?;

    let n = grid.sample_count();
    let mut product = vec![1.0; n];
    let mut sum = vec![0.0; n];
    for (v, e) in linear.iter().zip(eps) {
        for k in 0..n {
            product[k] *= v.values()[k];
            sum[k] += e * v.values()[k];
        }
    }
    let pa = SpaceTimeField::from_raw(grid, FieldRole::Solution, product);
    let sa = SpaceTimeField::from_raw(grid, FieldRole::Solution, sum);
    let w_top = solve_source(grid, &product_source(a, &pa))?;
    let multinomial = solve_source(grid, &nonlinear_source(a, &sa))?;
    let rem: Vec<f64> = (0..n)
        .map(|k| solution.values()[k] - sa.values()[k] - multinomial.values()[k])
        .collect();
    let remainder = SpaceTimeField::from_raw(grid, FieldRole::Remainder, rem);
    Ok(ExpansionTerms { linear, w_top, multinomial, remainder, solution, report })
}

/// Summary of one forward run, convenient for serialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForwardSummary {
    pub energy_e1: f64,
    pub data_norm: f64,
    pub report: PicardReport,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::wave::{energy_norm, normal_derivative, solve_linear_wave};
    use crate::SpatialField;

    fn grid1(nx: usize, nt: usize, t: f64) -> Arc<Grid> {
        Arc::new(Grid::new(&GridSpec::interval(1.0, t, nx, nt)).unwrap())
    }

    fn pulse(grid: &Arc<Grid>, amp: f64) -> BoundarySignal {
        BoundarySignal::from_fn(grid, SignalRole::Dirichlet, move |x, _, t| {
            if x < 0.5 && t > 0.0 && t < 0.5 {
                amp * (std::f64::consts::PI * t / 0.5).sin().powi(4)
            } else {
                0.0
            }
        })
    }

    fn setup(m: u32) -> (Arc<Grid>, Potential) {
        let g = grid1(101, 601, 3.5);
        let w = AdmissibleWindow::with_default_lambda(&g).unwrap();
        let a = Potential::bump(&g, m, w, 5.0, [0.5, 0.0], 0.3, 1.75, 0.4).unwrap();
        (g, a)
    }

    #[test]
    fn zero_data_gives_zero() {
        let (g, a) = setup(2);
        let f = BoundarySignal::zeros(&g, SignalRole::Dirichlet);
        let (u, rep) = solve_semilinear(&g, &a, &f, 1e-12, 10).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(u.max_abs(), 0.0);
        assert!(dn_map(&g, &a, &f).unwrap().is_zero());
    }

    #[test]
    fn zero_potential_is_linear_bitwise() {
        let (g, _) = setup(2);
        let w = AdmissibleWindow::with_default_lambda(&g).unwrap();
        let a = Potential::zero(&g, 2, w).unwrap();
        let f = pulse(&g, 1.0);
        let z = SpatialField::zeros(&g);
        let lin = solve_linear_wave(&g, &SpaceTimeField::zeros(&g, FieldRole::Source), &f, &z, &z).unwrap();
        let (u, rep) = solve_semilinear(&g, &a, &f, 1e-12, 10).unwrap();
        assert_eq!(rep.iterations, 2);
        assert_eq!(u.values(), lin.values());
    }

    #[test]
    fn windowed_matches_literal() {
        for m in [2u32, 3] {
            let (g, a) = setup(m);
            let f = pulse(&g, 0.3);
            // Well above the round-off floor of the literal iteration (~1e-14 relative).
            let s = PicardSettings { tol_rel: 1e-11, max_iter: 80 };
            let tol = s.tolerance(&f).unwrap();
            let (u, rep) = solve_semilinear(&g, &a, &f, tol, s.max_iter).unwrap();
            let lit = normal_derivative(&u).unwrap();
            let (win, rep2) = dn_map_with(&g, &a, &f, &s).unwrap();
            assert_eq!(rep.iterations, rep2.iterations);
            for (r1, r2) in rep.residual_history.iter().zip(&rep2.residual_history) {
                assert!((r1 - r2).abs() <= 1e-6 * r1 + 1e-13, "{r1} {r2}");
            }
            let diff = win.axpy(-1.0, &lit).unwrap().max_abs();
            assert!(diff <= 1e-10 * lit.max_abs(), "m={m}: {diff}");
            // Explicit nonlinear leapfrog is the same discrete fixed point.
            let ex = solve_semilinear_explicit(&g, &a, &f).unwrap();
            let d = energy_norm(&ex.axpy(-1.0, &u).unwrap(), 1).unwrap();
            assert!(d <= 1e-10 * energy_norm(&u, 1).unwrap(), "m={m}: {d}");
        }
    }

    #[test]
    fn residuals_decrease_and_remainder_is_quadratic() {
        let (g, a) = setup(2);
        let v1 = solve_free(&g, &pulse(&g, 1.0)).unwrap();
        let mut ratios = Vec::new();
        for eps in [1e-2, 5e-3, 2.5e-3] {
            let f = pulse(&g, eps);
            let (u, rep) = solve_semilinear(&g, &a, &f, 1e-14, 40).unwrap();
            assert!(rep.converged);
            assert!(rep.residual_history.windows(2).all(|w| w[1] < w[0]));
            assert!(rep.contraction_ratio < 1.0);
            let r = energy_norm(&u.axpy(-eps, &v1).unwrap(), 1).unwrap();
            ratios.push(r / (eps * eps));
        }
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi / lo < 1.2, "{ratios:?}");
    }

    #[test]
    fn dn_map_is_not_linear() {
        let (g, a) = setup(2);
        let f = pulse(&g, 0.2);
        let l1 = dn_map(&g, &a, &f).unwrap();
        let l2 = dn_map(&g, &a, &f.scaled(2.0)).unwrap();
        let defect = l2.axpy(-2.0, &l1).unwrap().max_abs();
        assert!(defect > 1e-6 * l2.max_abs(), "{defect}");
    }

    #[test]
    fn instrument_of_constant_psi() {
        // u = g(t − x): ∂_ν u = g′(t) at x = 0 and −g′(t − 1) at x = 1, so with ψ ≡ 1 the
        // measurement is g(T) − g(0) − g(T − 1) + g(−1) = −g(T − 1) for T = 1.2.
        let g = grid1(801, 1201, 1.2);
        let gfun = |s: f64| if s > 0.0 && s < 0.5 { (std::f64::consts::PI * s / 0.5).sin().powi(4) } else { 0.0 };
        let f = BoundarySignal::from_fn(&g, SignalRole::Dirichlet, move |x, _, t| gfun(t - x));
        let psi = BoundarySignal::from_fn(&g, SignalRole::Instrument, |_, _, _| 1.0);
        let neu = normal_derivative(&solve_free(&g, &f).unwrap()).unwrap();
        let meas = instrument_measurement(&psi, &neu).unwrap();
        let exact = -gfun(0.2);
        assert!((meas - exact).abs() < 2e-3 * exact.abs(), "{meas} vs {exact}");
        assert_eq!(instrument_measurement(&psi, &BoundarySignal::zeros(&g, SignalRole::Neumann)).unwrap(), 0.0);
        assert_eq!(instrument_measurement(&BoundarySignal::zeros(&g, SignalRole::Instrument), &neu).unwrap(), 0.0);
    }

    #[test]
    fn expansion_zero_potential() {
        let (g, _) = setup(2);
        let w = AdmissibleWindow::with_default_lambda(&g).unwrap();
        let a = Potential::zero(&g, 2, w).unwrap();
        let f = pulse(&g, 0.1);
        let t = expansion_terms(&g, &a, &[f.clone(), f.scaled(0.5)], &[0.1, 0.2], &PicardSettings::default()).unwrap();
        assert_eq!(t.w_top.max_abs(), 0.0);
        assert!(t.remainder.max_abs() < 1e-14);
    }

    #[test]
    fn multinomial_cross_term_is_w_top() {
        // S(−a(ε₁v₁ + ε₂v₂)²) at (ε₁, ε₂) minus the same at (ε₁, −ε₂) is 4ε₁ε₂·w.
        let (g, a) = setup(2);
        let f1 = pulse(&g, 1.0);
        let f2 = BoundarySignal::from_fn(&g, SignalRole::Dirichlet, |x, _, t| {
            if x > 0.5 && t > 0.1 && t < 0.6 { (std::f64::consts::PI * (t - 0.1) / 0.5).sin().powi(4) } else { 0.0 }
        });
        let s = PicardSettings::default();
        let p = expansion_terms(&g, &a, &[f1.clone(), f2.clone()], &[0.1, 0.05], &s).unwrap();
        let q = expansion_terms(&g, &a, &[f1, f2], &[0.1, -0.05], &s).unwrap();
        let cross = p.multinomial.axpy(-1.0, &q.multinomial).unwrap().scaled(1.0 / (4.0 * 0.1 * 0.05));
        let diff = cross.axpy(-1.0, &p.w_top).unwrap().max_abs();
        assert!(p.w_top.max_abs() > 0.0);
        assert!(diff <= 1e-10 * p.w_top.max_abs(), "{diff}");
    }
}
