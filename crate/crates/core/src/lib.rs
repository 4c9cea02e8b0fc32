//! Radial numerical laboratory for the energy-critical semilinear heat
//! equation `u_t = Delta u + |u|^{p-1} u`, `p = (n+2)/(n-2)`, near the
//! ground-state family.
//!
//! The crate provides radial grids and quadrature, the closed-form ground
//! state and its functionals, the linearized operator and its unstable
//! eigenpair, an IMEX time integrator with blowup/decay event detection,
//! modulation decomposition and tracking in renormalized time, regime
//! classification with threshold bisection, and an independent identity
//! verification suite.

pub mod config;
pub mod error;
pub mod evolution;
pub mod field;
pub mod grid;
pub mod ground_state;
pub mod interp;
pub mod io;
pub mod modulation;
pub mod params;
pub mod regimes;
pub mod spectral;
pub mod tridiag;
pub mod verify;

pub use error::{Error, Result};
pub use field::{inner_product, norm, NormKind, RadialField};
pub use grid::{make_grid, refine_double, Grading, RadialGrid};
pub use params::DimensionParams;
