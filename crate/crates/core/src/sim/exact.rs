use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::fenwick::Fenwick;
use super::model::{check_observations, BoundaryPolicy, StochasticModel};
use super::rng::rng_from_seed;
use super::state::{EventKind, EventRecord, PopulationState, Snapshot, Trajectory};
use crate::error::{Error, Result};

/// Exact (Gillespie) simulation from `state0` up to `t_end`.
///
/// Sites are sampled through a Fenwick tree over `(b_i + d_i + mu) N_i`; the event
/// type is then chosen in proportion to `(b_i, d_i, mu)` and a mutation offset in
/// proportion to `w_l`. A mutation adds one individual at the target and leaves
/// the parent in place.
pub fn simulate_exact(
    model: &StochasticModel,
    state0: &PopulationState,
    t_end: f64,
    observation_times: &[f64],
    seed: u64,
) -> Result<Trajectory> {
    if state0.counts.len() != model.len() {
        return Err(Error::param(
            "state0",
            "length differs from the model window",
        ));
    }
    check_observations(observation_times, state0.time, t_end)?;

    let mut rng = rng_from_seed(seed);
    let mut counts = state0.counts.clone();
    let weights: Vec<f64> = counts
        .iter()
        .enumerate()
        .map(|(i, &n)| model.composite(i) * n as f64)
        .collect();
    let mut tree = Fenwick::new(&weights);
    let mut total: u64 = counts.iter().sum();
    if total > model.cap {
        return Err(Error::PopulationCap {
            cap: model.cap,
            time: state0.time,
        });
    }

    let mut traj = Trajectory {
        seed,
        i_min: model.i_min,
        t_end,
        snapshots: Vec::with_capacity(observation_times.len()),
        boundary_leak: 0,
        events: 0,
        extinct_at: (total == 0).then_some(state0.time),
        clip_count: 0,
        event_log: model.event_log.then(Vec::new),
    };
    let mut next_obs = 0;
    let mut t = state0.time;

    loop {
        let rate = tree.total();
        let t_next = if total == 0 || rate <= 0.0 {
            f64::INFINITY
        } else {
            let e: f64 = Exp1.sample(&mut rng);
            t + e / rate
        };
        while next_obs < observation_times.len() && observation_times[next_obs] < t_next {
            traj.snapshots.push(Snapshot {
                time: observation_times[next_obs],
                counts: counts.clone(),
            });
            next_obs += 1;
        }
        if t_next > t_end {
            break;
        }
        t = t_next;

        let idx = tree.find(rng.random::<f64>() * rate);
        let n = counts[idx];
        debug_assert!(n > 0);
        let (b, d) = (model.birth[idx], model.death[idx]);
        let v = rng.random::<f64>() * (b + d + model.mu);
        let kind = if v < b {
            counts[idx] += 1;
            total += 1;
            tree.set(idx, model.composite(idx) * counts[idx] as f64);
            EventKind::Birth
        } else if v < b + d {
            counts[idx] -= 1;
            total -= 1;
            tree.set(idx, model.composite(idx) * counts[idx] as f64);
            EventKind::Death
        } else {
            let offset = model.draw_offset(&mut rng);
            match model.target(idx, offset) {
                Some(j) => {
                    counts[j] += 1;
                    total += 1;
                    tree.set(j, model.composite(j) * counts[j] as f64);
                }
                None => match model.policy {
                    BoundaryPolicy::Absorb => traj.boundary_leak += 1,
                    BoundaryPolicy::Strict => {
                        return Err(Error::BoundaryViolation {
                            site: model.i_min + idx as i64 + offset,
                            time: t,
                        })
                    }
                },
            }
            EventKind::Mutation {
                target: model.i_min + idx as i64 + offset,
            }
        };
        traj.events += 1;
        if let Some(log) = traj.event_log.as_mut() {
            log.push(EventRecord {
                time: t,
                site: model.i_min + idx as i64,
                kind,
            });
        }
        if total == 0 {
            traj.extinct_at = Some(t);
        }
        if total > model.cap {
            return Err(Error::PopulationCap {
                cap: model.cap,
                time: t,
            });
        }
    }
    Ok(traj)
}

/// Engine used by [`simulate_windowed_supercritical`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowedEngine {
    /// Composite-rate Gillespie; fastest, no cross-window coupling.
    #[default]
    Gillespie,
    /// Per-site Poisson streams keyed by lattice index; runs on nested windows
    /// with the same seed are pathwise ordered.
    SharedStreams,
}

/// The localized process on the model window: sites outside are frozen at zero and
/// mutations aimed at them are discarded (counted in `boundary_leak`).
///
/// `mean_floor` is `K^a`; every initial count must be at least its square root.
pub fn simulate_windowed_supercritical(
    model: &StochasticModel,
    state0: &PopulationState,
    mean_floor: f64,
    t_end: f64,
    observation_times: &[f64],
    seed: u64,
    engine: WindowedEngine,
) -> Result<Trajectory> {
    if !model.birth_dominates {
        return Err(Error::Regime(format!(
            "windowed simulation needs b >= d everywhere, model is {:?}",
            model.regime
        )));
    }
    let floor = mean_floor.sqrt();
    if let Some((slot, n)) = state0
        .counts
        .iter()
        .enumerate()
        .find(|(_, &n)| (n as f64) < floor)
    {
        return Err(Error::param(
            "state0",
            format!("slot {slot} starts with {n} individuals, below K^(a/2) = {floor}"),
        ));
    }
    let model = model.clone().with_policy(BoundaryPolicy::Absorb);
    match engine {
        WindowedEngine::Gillespie => simulate_exact(&model, state0, t_end, observation_times, seed),
        WindowedEngine::SharedStreams => {
            super::coupled::simulate_shared_streams(&model, state0, t_end, observation_times, seed)
        }
    }
}
