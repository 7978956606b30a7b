use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::rng::rng_from_seed;
use crate::error::{Error, Result};

/// Integer subpopulation sizes on the window at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    pub counts: Vec<u64>,
    pub time: f64,
    pub event_count: u64,
}

impl PopulationState {
    pub fn new(counts: Vec<u64>) -> Self {
        PopulationState {
            counts,
            time: 0.0,
            event_count: 0,
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0; len])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialMode {
    /// Independent `Poisson(n_i(0))` per site.
    #[default]
    Poisson,
    /// `n_i(0)` rounded to the nearest integer.
    Deterministic,
}

/// Draws an initial state with means `means` (one per site).
pub fn sample_initial(means: &[f64], mode: InitialMode, seed: u64) -> Result<PopulationState> {
    if let Some(bad) = means.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
        return Err(Error::param(
            "initial mean",
            format!("must be finite and nonnegative, got {bad}"),
        ));
    }
    let counts = match mode {
        InitialMode::Deterministic => means.iter().map(|m| m.round() as u64).collect(),
        InitialMode::Poisson => {
            let mut rng = rng_from_seed(seed);
            means
                .iter()
                .map(|&m| {
                    if m == 0.0 {
                        0
                    } else {
                        Poisson::new(m)
                            .expect("positive finite mean")
                            .sample(&mut rng) as u64
                    }
                })
                .collect()
        }
    };
    Ok(PopulationState::new(counts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Birth,
    Death,
    Mutation { target: i64 },
}

/// One event of the debug log; `site` is the lattice index of the acting individual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub site: i64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub counts: Vec<u64>,
}

/// A simulated path, observed at fixed times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    /// Lattice index of storage slot 0.
    pub i_min: i64,
    pub t_end: f64,
    pub snapshots: Vec<Snapshot>,
    /// Mutation offspring discarded because they landed outside the window.
    pub boundary_leak: u64,
    pub events: u64,
    /// Exact time the whole window became empty, if it did before `t_end`.
    pub extinct_at: Option<f64>,
    /// Tau-leap only: steps where a count was clipped at zero.
    pub clip_count: u64,
    pub event_log: Option<Vec<EventRecord>>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn count(&self, obs: usize, slot: usize) -> u64 {
        self.snapshots[obs].counts[slot]
    }

    /// Long-format CSV rows `replicate,time,site,count`.
    pub fn csv_rows(&self, replicate: u64, out: &mut String) {
        use std::fmt::Write;
        for snap in &self.snapshots {
            for (slot, c) in snap.counts.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{replicate},{},{},{c}",
                    snap.time,
                    self.i_min + slot as i64
                );
            }
        }
    }
}

/// Extinction time of the window (or of a compact): exact when the path died,
/// otherwise censored at the end of the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "time", rename_all = "snake_case")]
pub enum ExtinctionTime {
    Extinct(f64),
    Censored(f64),
}

impl ExtinctionTime {
    pub fn is_extinct(&self) -> bool {
        matches!(self, ExtinctionTime::Extinct(_))
    }

    pub fn time(&self) -> f64 {
        match *self {
            ExtinctionTime::Extinct(t) | ExtinctionTime::Censored(t) => t,
        }
    }
}

/// Total extinction: the exact event time when recorded, else the first
/// observation with an empty window.
pub fn extinction_time(traj: &Trajectory) -> ExtinctionTime {
    if let Some(t) = traj.extinct_at {
        return ExtinctionTime::Extinct(t);
    }
    traj.snapshots
        .iter()
        .find(|s| s.counts.iter().all(|&c| c == 0))
        .map_or(ExtinctionTime::Censored(traj.t_end), |s| {
            ExtinctionTime::Extinct(s.time)
        })
}

/// First observation time at which every slot in `slots` is empty.
pub fn extinction_time_on(traj: &Trajectory, slots: std::ops::Range<usize>) -> ExtinctionTime {
    traj.snapshots
        .iter()
        .find(|s| s.counts[slots.clone()].iter().all(|&c| c == 0))
        .map_or(ExtinctionTime::Censored(traj.t_end), |s| {
            ExtinctionTime::Extinct(s.time)
        })
}
