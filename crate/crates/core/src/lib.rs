//! Multi-scale control variate (MSCV) Monte Carlo for kinetic equations.
//!
//! The crate contains deterministic solvers (space homogeneous Boltzmann and
//! BGK, 1D kinetic transport, 1D compressible Euler), the control variate
//! estimators built on top of them, and the drivers for the five benchmark
//! problems.

pub mod collision;
pub mod equilibrium;
pub mod homogeneous;
pub mod kinetic1d;
pub mod error;
pub mod euler1d;
pub mod experiments;
pub mod phase_grid;
pub mod quadrature;
pub mod uq;
pub mod validation;
pub mod weno;

pub use error::{Error, Result};
