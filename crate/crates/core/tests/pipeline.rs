use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use proptest::prelude::*;
use waveinv_core::forward::{dn_map, AdmissibleWindow, Potential};
use waveinv_core::inversion::{reconstruct_point_1d, schedule_parameters, DnOracle, SimulatedDn, TabulatedDn};
use waveinv_core::probes::measurement_function;
use waveinv_core::{BoundarySignal, Error, Grid, GridSpec, SignalRole};

fn grid(nx: usize, nt: usize) -> Arc<Grid> {
    Arc::new(GridSpec::interval(1.0, 3.5, nx, nt).build().unwrap())
}

fn pulse(g: &Arc<Grid>, amp: f64, len: f64) -> BoundarySignal {
    BoundarySignal::from_fn(g, SignalRole::Dirichlet, move |_, _, t| {
        if t > 0.0 && t < len {
            amp * (PI * t / len).sin().powi(4)
        } else {
            0.0
        }
    })
}

/// Forwards to an inner oracle and keeps every input it was asked about.
struct Recorder<'a> {
    inner: &'a dyn DnOracle,
    seen: Mutex<Vec<BoundarySignal>>,
}

impl DnOracle for Recorder<'_> {
    fn grid(&self) -> &Arc<Grid> {
        self.inner.grid()
    }

    fn neumann(&self, f: &BoundarySignal) -> waveinv_core::Result<BoundarySignal> {
        self.seen.lock().unwrap().push(f.clone());
        self.inner.neumann(f)
    }
}

#[test]
fn tabulated_replay_reproduces_live_estimate() {
    let g = grid(101, 401);
    let w = AdmissibleWindow::with_default_lambda(&g).unwrap();
    let a = Potential::bump(&g, 2, w, 2.0, [0.5, 0.0], 0.3, 1.75, 0.4).unwrap();
    let mf = measurement_function(&g, &w, [1.0, 0.0], 0.04).unwrap();
    let sched = schedule_parameters(1e-3, 0.5, 0.05, 0.0, 2, 1).unwrap().with_probe(49.0, 1e-2).unwrap();
    let live = SimulatedDn::new(a, Default::default());
    let rec = Recorder { inner: &live, seen: Mutex::new(Vec::new()) };
    let first = reconstruct_point_1d(&rec, 0.5, 1.75, &sched, &mf, None).unwrap();
    let inputs = rec.seen.into_inner().unwrap();
    assert!(!inputs.is_empty());

    let table = TabulatedDn::record(&live, &inputs).unwrap();
    let replay = reconstruct_point_1d(&table, 0.5, 1.75, &sched, &mf, None).unwrap();
    assert_eq!(first.value.to_bits(), replay.value.to_bits());
    assert!(first.value > 0.0);

    // A table that lacks one of the inputs must refuse rather than guess.
    let short = TabulatedDn::record(&live, &inputs[1..]).unwrap();
    assert!(reconstruct_point_1d(&short, 0.5, 1.75, &sched, &mf, None).is_err());
}

#[test]
fn zero_potential_gives_zero_estimate() {
    let g = grid(101, 401);
    let w = AdmissibleWindow::with_default_lambda(&g).unwrap();
    let mf = measurement_function(&g, &w, [1.0, 0.0], 0.04).unwrap();
    let sched = schedule_parameters(1e-3, 0.5, 0.05, 0.0, 2, 1).unwrap().with_probe(49.0, 1e-2).unwrap();
    let oracle = SimulatedDn::new(Potential::zero(&g, 2, w).unwrap(), Default::default());
    let e = reconstruct_point_1d(&oracle, 0.5, 1.75, &sched, &mf, None).unwrap();
    assert!(e.value.abs() < 1e-9, "{}", e.value);
}

#[test]
fn point_outside_plateau_is_rejected() {
    let g = grid(101, 401);
    let w = AdmissibleWindow::with_default_lambda(&g).unwrap();
    let mf = measurement_function(&g, &w, [1.0, 0.0], 0.04).unwrap();
    let sched = schedule_parameters(1e-3, 0.5, 0.05, 0.0, 2, 1).unwrap().with_probe(49.0, 1e-2).unwrap();
    let oracle = SimulatedDn::new(Potential::zero(&g, 2, w).unwrap(), Default::default());
    let r = reconstruct_point_1d(&oracle, 0.5, 0.1, &sched, &mf, None);
    assert!(matches!(r, Err(Error::OutOfPlateau(_))), "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // With a = 0 the map is the linear DN map of the free wave equation.
    #[test]
    fn free_dn_map_is_linear(c1 in -3.0f64..3.0, c2 in -3.0f64..3.0, len in 0.2f64..0.8) {
        let g = grid(41, 161);
        let w = AdmissibleWindow::with_default_lambda(&g).unwrap();
        let a = Potential::zero(&g, 3, w).unwrap();
        let f1 = pulse(&g, 1.0, len);
        let f2 = BoundarySignal::from_fn(&g, SignalRole::Dirichlet, |x, _, t| x * (PI * t).sin().powi(3));
        let lhs = dn_map(&g, &a, &f1.scaled(c1).axpy(c2, &f2).unwrap()).unwrap();
        let rhs = dn_map(&g, &a, &f1).unwrap().scaled(c1).axpy(c2, &dn_map(&g, &a, &f2).unwrap()).unwrap();
        let scale = 1.0 + lhs.max_abs();
        prop_assert!(lhs.axpy(-1.0, &rhs).unwrap().max_abs() <= 1e-12 * scale);
    }

    // Λ_a(cf) − cΛ₀(f) is O(c^m) as c → 0, so halving c divides it by about 2^m.
    #[test]
    fn nonlinear_part_scales_like_power_m(m in 2u32..4) {
        let g = grid(41, 161);
        let w = AdmissibleWindow::with_default_lambda(&g).unwrap();
        let a = Potential::bump(&g, m, w, 1.0, [0.5, 0.0], 0.3, 1.75, 0.4).unwrap();
        let f = pulse(&g, 1.0, 0.5);
        let lin = dn_map(&g, &Potential::zero(&g, m, w).unwrap(), &f).unwrap();
        let gap = |c: f64| dn_map(&g, &a, &f.scaled(c)).unwrap().axpy(-c, &lin).unwrap().max_abs();
        let ratio = gap(0.1) / gap(0.05);
        let expect = 2f64.powi(m as i32);
        prop_assert!((ratio / expect - 1.0).abs() < 0.05, "ratio {} vs {}", ratio, expect);
    }
}
