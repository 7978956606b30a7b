use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use super::model::{check_observations, BoundaryPolicy, StochasticModel};
use super::rng::rng_from_seed;
use super::state::{PopulationState, Snapshot, Trajectory};
use crate::error::{Error, Result};

fn poisson<R: Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean)
            .expect("finite positive mean")
            .sample(rng) as u64
    }
}

/// Approximate simulation by Poisson leaps of length at most `dt_leap`.
///
/// Each step draws births, deaths and mutations per site from Poisson laws with
/// the rates frozen at the start of the step. A count driven below zero is set to
/// zero and `clip_count` is incremented. Any channel with `rate * dt_leap` above
/// `model.leap_bound` at an occupied site aborts the run.
pub fn simulate_tau_leap(
    model: &StochasticModel,
    state0: &PopulationState,
    t_end: f64,
    dt_leap: f64,
    observation_times: &[f64],
    seed: u64,
) -> Result<Trajectory> {
    if !(dt_leap > 0.0) || !dt_leap.is_finite() {
        return Err(Error::param("dt_leap", "must be positive and finite"));
    }
    if state0.counts.len() != model.len() {
        return Err(Error::param(
            "state0",
            "length differs from the model window",
        ));
    }
    check_observations(observation_times, state0.time, t_end)?;

    let mut rng = rng_from_seed(seed);
    let mut counts = state0.counts.clone();
    let mut traj = Trajectory {
        seed,
        i_min: model.i_min,
        t_end,
        snapshots: Vec::with_capacity(observation_times.len()),
        boundary_leak: 0,
        events: 0,
        extinct_at: None,
        clip_count: 0,
        event_log: None,
    };
    let mut t = state0.time;
    let mut next_obs = 0;
    let mut births = vec![0u64; model.len()];
    let mut deaths = vec![0u64; model.len()];
    let mut arrivals = vec![0u64; model.len()];

    loop {
        while next_obs < observation_times.len() && observation_times[next_obs] <= t {
            traj.snapshots.push(Snapshot {
                time: observation_times[next_obs],
                counts: counts.clone(),
            });
            next_obs += 1;
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            traj.extinct_at.get_or_insert(t);
        }
        if t >= t_end || total == 0 {
            break;
        }
        let horizon = observation_times
            .get(next_obs)
            .copied()
            .unwrap_or(t_end)
            .min(t_end);
        let dt = dt_leap.min(horizon - t);

        arrivals.iter_mut().for_each(|a| *a = 0);
        for i in 0..model.len() {
            let n = counts[i];
            if n == 0 {
                births[i] = 0;
                deaths[i] = 0;
                continue;
            }
            let worst = model.birth[i].max(model.death[i]).max(model.mu) * dt_leap;
            if worst > model.leap_bound {
                return Err(Error::LeapBound {
                    mean: worst,
                    bound: model.leap_bound,
                });
            }
            let nf = n as f64;
            births[i] = poisson(model.birth[i] * nf * dt, &mut rng);
            deaths[i] = poisson(model.death[i] * nf * dt, &mut rng);
            let mutations = poisson(model.mu * nf * dt, &mut rng);
            traj.events += births[i] + deaths[i] + mutations;
            spread_mutations(
                model,
                i,
                mutations,
                t,
                &mut arrivals,
                &mut traj.boundary_leak,
                &mut rng,
            )?;
        }
        for i in 0..model.len() {
            let gained = counts[i] + births[i] + arrivals[i];
            if deaths[i] > gained {
                traj.clip_count += 1;
                counts[i] = 0;
            } else {
                counts[i] = gained - deaths[i];
            }
        }
        t += dt;
        let total: u64 = counts.iter().sum();
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

/// Distributes `m` mutation offspring from slot `source` over the kernel offsets.
fn spread_mutations<R: Rng>(
    model: &StochasticModel,
    source: usize,
    m: u64,
    time: f64,
    arrivals: &mut [u64],
    leak: &mut u64,
    rng: &mut R,
) -> Result<()> {
    let mut deposit = |offset: i64, k: u64, leak: &mut u64| -> Result<()> {
        if k == 0 {
            return Ok(());
        }
        match model.target(source, offset) {
            Some(j) => arrivals[j] += k,
            None => match model.policy {
                BoundaryPolicy::Absorb => *leak += k,
                BoundaryPolicy::Strict => {
                    return Err(Error::BoundaryViolation {
                        site: model.i_min + source as i64 + offset,
                        time,
                    })
                }
            },
        }
        Ok(())
    };
    if m <= 4 * model.offsets.len() as u64 {
        for _ in 0..m {
            deposit(model.draw_offset(rng), 1, leak)?;
        }
        return Ok(());
    }
    // Multinomial split by successive conditional binomials.
    let mut left = m;
    let mut mass = model.mu;
    for (&offset, &w) in model.offsets.iter().zip(&model.weights) {
        if left == 0 {
            break;
        }
        let q = (w / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, q)
            .expect("probability in [0, 1]")
            .sample(rng);
        deposit(offset, k, leak)?;
        left -= k;
        mass -= w;
    }
    if left > 0 {
        let last = *model
            .offsets
            .last()
            .expect("kernel has at least one offset");
        deposit(last, left, leak)?;
    }
    Ok(())
}
