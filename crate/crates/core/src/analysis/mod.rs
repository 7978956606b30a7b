//! Logarithmic transforms of simulated populations and the statistics that
//! compare them with the deterministic limits.
//!
//! Simulations run in plain time. This module is the only place where plain
//! time is divided by `ln K`.

mod experiments;
mod field;
mod stats;

pub use experiments::*;
pub use field::*;
pub use stats::*;
