//! Shared-stream construction of the localized process.
//!
//! Each (site, channel) pair owns a Poisson random measure on time x [0, inf) with
//! intensity `rate ds dtheta`, cut into strips of `STRIP` individuals. A point
//! `(s, theta)` fires when `theta < N_site(s-)`. Strip streams are keyed by the
//! lattice index, so two windows run with the same seed read identical points and
//! the smaller window's counts never exceed the larger one's.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::model::{check_observations, StochasticModel};
use super::rng::{derive_seed, rng_from_seed, SimRng};
use super::state::{EventKind, EventRecord, PopulationState, Snapshot, Trajectory};
use crate::error::{Error, Result};

const STRIP: u64 = 8;

const BIRTH: usize = 0;
const DEATH: usize = 1;
const MUTATION: usize = 2;

struct Strip {
    slot: usize,
    channel: usize,
    index: u64,
    rng: SimRng,
    rate: f64,
}

impl Strip {
    /// Next point after `t`: (time, theta, mark).
    fn next_point(&mut self, t: f64) -> (f64, f64, f64) {
        let e: f64 = Exp1.sample(&mut self.rng);
        let time = t + e / self.rate;
        let theta = (self.index as f64 + self.rng.random::<f64>()) * STRIP as f64;
        let mark = self.rng.random::<f64>();
        (time, theta, mark)
    }
}

#[derive(PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

struct Pending {
    theta: f64,
    mark: f64,
}

pub(crate) fn simulate_shared_streams(
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
    let t0 = state0.time;
    let mut counts = state0.counts.clone();
    let mut total: u64 = counts.iter().sum();

    let mut strips: Vec<Strip> = Vec::new();
    let mut pending: Vec<Pending> = Vec::new();
    let mut heap = BinaryHeap::new();
    // strips_open[slot] = number of strips per channel opened so far at this slot.
    let mut strips_open = vec![0u64; model.len()];

    let channel_rate = |slot: usize, channel: usize| match channel {
        BIRTH => model.birth[slot],
        DEATH => model.death[slot],
        _ => model.mu,
    };

    // Opens strips so that `STRIP * strips_open[slot] >= counts[slot]`. A new strip's
    // stream starts at time 0; points before `now` are skipped, they could not have
    // fired because the site never held that many individuals before.
    let open = |slot: usize,
                n: u64,
                now: f64,
                strips: &mut Vec<Strip>,
                pending: &mut Vec<Pending>,
                heap: &mut BinaryHeap<Reverse<Key>>,
                strips_open: &mut Vec<u64>| {
        while strips_open[slot] * STRIP < n {
            let index = strips_open[slot];
            strips_open[slot] += 1;
            let site = model.i_min + slot as i64;
            for channel in [BIRTH, DEATH, MUTATION] {
                let rate = channel_rate(slot, channel) * STRIP as f64;
                if rate <= 0.0 {
                    continue;
                }
                let stream = derive_seed(seed, &[site as u64, channel as u64, index]);
                let mut strip = Strip {
                    slot,
                    channel,
                    index,
                    rng: rng_from_seed(stream),
                    rate,
                };
                let mut point = strip.next_point(0.0);
                while point.0 <= now {
                    point = strip.next_point(point.0);
                }
                let id = strips.len();
                strips.push(strip);
                pending.push(Pending {
                    theta: point.1,
                    mark: point.2,
                });
                heap.push(Reverse(Key(point.0, id)));
            }
        }
    };

    for slot in 0..model.len() {
        open(
            slot,
            counts[slot],
            t0,
            &mut strips,
            &mut pending,
            &mut heap,
            &mut strips_open,
        );
    }

    let mut traj = Trajectory {
        seed,
        i_min: model.i_min,
        t_end,
        snapshots: Vec::with_capacity(observation_times.len()),
        boundary_leak: 0,
        events: 0,
        extinct_at: (total == 0).then_some(t0),
        clip_count: 0,
        event_log: model.event_log.then(Vec::new),
    };
    let mut next_obs = 0;

    while let Some(Reverse(Key(t, id))) = heap.pop() {
        while next_obs < observation_times.len() && observation_times[next_obs] < t {
            traj.snapshots.push(Snapshot {
                time: observation_times[next_obs],
                counts: counts.clone(),
            });
            next_obs += 1;
        }
        if t > t_end {
            break;
        }
        let Pending { theta, mark } = pending[id];
        let (slot, channel) = (strips[id].slot, strips[id].channel);
        let point = strips[id].next_point(t);
        pending[id] = Pending {
            theta: point.1,
            mark: point.2,
        };
        heap.push(Reverse(Key(point.0, id)));

        if theta >= counts[slot] as f64 {
            continue;
        }
        let site = model.i_min + slot as i64;
        let kind = match channel {
            BIRTH => {
                counts[slot] += 1;
                total += 1;
                open(
                    slot,
                    counts[slot],
                    t,
                    &mut strips,
                    &mut pending,
                    &mut heap,
                    &mut strips_open,
                );
                EventKind::Birth
            }
            DEATH => {
                counts[slot] -= 1;
                total -= 1;
                EventKind::Death
            }
            _ => {
                let offset = model.offset_at(mark);
                match model.target(slot, offset) {
                    Some(j) => {
                        counts[j] += 1;
                        total += 1;
                        open(
                            j,
                            counts[j],
                            t,
                            &mut strips,
                            &mut pending,
                            &mut heap,
                            &mut strips_open,
                        );
                    }
                    None => traj.boundary_leak += 1,
                }
                EventKind::Mutation {
                    target: site + offset,
                }
            }
        };
        traj.events += 1;
        if let Some(log) = traj.event_log.as_mut() {
            log.push(EventRecord {
                time: t,
                site,
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
    while next_obs < observation_times.len() {
        traj.snapshots.push(Snapshot {
            time: observation_times[next_obs],
            counts: counts.clone(),
        });
        next_obs += 1;
    }
    Ok(traj)
}
