//! Trait-structured branching processes with small mutations.
//!
//! The crate covers the individual-based model on a discretized trait lattice
//! (exact and tau-leap simulation, windowed runs), its first and second moment
//! equations, the log-scale exponent system, numerical solutions of the limiting
//! Hamilton-Jacobi equation and the statistics that compare them.
//!
//! Deterministic numerics are generic over [`Real`] (`f32` or `f64`); the
//! stochastic side always works in `f64`. The aliases below fix the common case.

pub mod analysis;
pub mod error;
pub mod hj;
pub mod meanfield;
pub mod model;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision aliases.
pub type Model = model::Model<f64>;
pub type TraitGrid = model::TraitGrid<f64>;
pub type RateTables = model::RateTables<f64>;
pub type DiscreteKernel = model::DiscreteKernel<f64>;

/// Single-precision aliases, for memory-bound sweeps of the deterministic solvers.
pub type ModelF32 = model::Model<f32>;
pub type TraitGridF32 = model::TraitGrid<f32>;
