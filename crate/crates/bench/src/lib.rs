//! Shared fixtures for the benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use waveinv_core::forward::{AdmissibleWindow, Potential};
use waveinv_core::{BoundarySignal, Grid, GridSpec, SignalRole, SpatialField};

/// Unit interval, T = 3.5, at the resolution of the 1D acceptance runs.
pub fn grid_1d(nx: usize) -> Arc<Grid> {
    Arc::new(GridSpec::interval(1.0, 3.5, nx, 4 * (nx - 1) + 1).build().expect("valid grid"))
}

/// Bump potential in the middle of the admissible window.
pub fn bump_1d(grid: &Arc<Grid>) -> Potential {
    let w = AdmissibleWindow::with_default_lambda(grid).expect("window");
    Potential::bump(grid, 2, w, 1.0, [0.5, 0.0], 0.3, 1.75, 0.4).expect("bump")
}

/// sin⁴ pulse of length 0.5 on every lateral node.
pub fn pulse(grid: &Arc<Grid>, amp: f64) -> BoundarySignal {
    BoundarySignal::from_fn(grid, SignalRole::Dirichlet, move |_, _, t| {
        if t > 0.0 && t < 0.5 {
            amp * (PI * t / 0.5).sin().powi(4)
        } else {
            0.0
        }
    })
}

/// Centred Gaussian e^{−|x|²} on [−6, 6]².
pub fn gaussian_2d(nx: usize) -> SpatialField {
    let g = Arc::new(GridSpec::square(12.0, 0.1, nx, 5).with_lower(&[-6.0, -6.0]).build().expect("valid grid"));
    SpatialField::from_fn(&g, |x, y| (-(x * x + y * y)).exp())
}
