//! Simulation and inverse spectral recovery for the strongly damped wave
//! equation `u_tt - Δu - Δu_t = f` on small discrete manifolds.
//!
//! The crate is organized along the measurement pipeline:
//!
//! - [`manifold`]: discrete circles, tori, intervals and rectangles with a
//!   conformal metric, their Laplace–Beltrami operator, eigendecomposition,
//!   region projections and Neumann traces.
//! - [`forward`]: damped modal kernels and the two measurement maps, the
//!   source-to-solution map on closed manifolds and the Dirichlet-to-Neumann
//!   map on manifolds with boundary.
//! - [`probe`]: temporal bumps, probe batteries and single-measurement packet
//!   trains, including the inductive splitting of a packet-train response.
//! - [`recover`]: Laplace transforms, matrix-pencil exponential fitting,
//!   rational pole fitting and assembly of spectral data sets.
//! - [`compare`]: equality decisions between spectral data sets.
//! - [`io`] and [`cli`]: CSV formats and the config-driven experiment runner.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod compare;
pub mod error;
pub mod forward;
pub mod io;
mod linalg;
pub mod manifold;
pub mod probe;
pub(crate) mod quad;
pub mod recover;

pub use error::{Error, Result};
pub use num_complex::Complex64;
