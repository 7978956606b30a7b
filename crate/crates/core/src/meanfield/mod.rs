//! Deterministic moment equations: means, log-scale exponents, second moments,
//! and the variance bounds checked against them.

mod bounds;
mod ode;
mod systems;

pub use bounds::{
    check_variance_bound_subcritical, check_variance_bound_supercritical, ladder_decay,
    max_relative_second_moment, BoundEntry, BoundKind, BoundReport,
};
pub use ode::{integrate, OdeStats, OdeSystem, Tolerances};
pub use systems::{
    exponent_rhs, initial_second_moments, integrate_exponent, integrate_mean,
    integrate_second_moments, weighted_l1_norm, ExponentField, MeanField, MeanSystem,
    MomentTrajectory, MOMENT_BUDGET,
};
