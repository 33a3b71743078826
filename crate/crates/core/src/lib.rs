//! Numerical pipeline for recovering the potential a(x,t) in □u + a uᵐ = 0 from boundary data.
//!
//! The crate is organised bottom-up: [`wave`] holds the linear leapfrog machinery,
//! [`forward`] the semilinear solver and the Dirichlet-to-Neumann map, [`probes`] the
//! Gaussian packets and measurement functions, [`findiff`] the mixed finite differences in
//! the source amplitudes, [`radon`] the partial Radon transform and its inversion, and
//! [`inversion`] the schedules, noise models and reconstruction drivers.

pub mod error;
pub mod field;
pub mod findiff;
pub mod forward;
pub mod grid;
pub mod inversion;
pub mod probes;
pub mod radon;
pub mod wave;

pub use error::{Error, Result};
pub use field::{BoundarySignal, FieldRole, SignalRole, SpaceTimeField, SpatialField};
pub use grid::{BoundaryNode, Grid, GridSpec};
