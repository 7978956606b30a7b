//! Stochastic simulation of the branching process on a finite trait window.
//!
//! All times here are plain simulation times; rescaling by `ln K` happens in
//! [`crate::analysis`].

mod coupled;
mod ensemble;
mod exact;
mod fenwick;
mod model;
pub mod rng;
mod state;
mod tauleap;

pub use ensemble::{
    run_ensemble, Collect, Ensemble, Estimate, MomentSums, Moments, Reducer, ReplicateFailure,
    CHUNK,
};
pub use exact::{simulate_exact, simulate_windowed_supercritical, WindowedEngine};
pub use fenwick::Fenwick;
pub use model::{BoundaryPolicy, StochasticModel, DEFAULT_LEAP_BOUND, DEFAULT_POPULATION_CAP};
pub use state::{
    extinction_time, extinction_time_on, sample_initial, EventKind, EventRecord, ExtinctionTime,
    InitialMode, PopulationState, Snapshot, Trajectory,
};
pub use tauleap::simulate_tau_leap;
