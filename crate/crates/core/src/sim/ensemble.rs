use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::replicate_seed;
use super::state::Trajectory;
use crate::error::{Error, Result};

/// Replicates per work unit. Fixed, so the merge tree does not depend on the pool.
pub const CHUNK: u64 = 64;

/// Streaming summary over replicate trajectories. `merge` must be associative;
/// partial results are always merged in replicate order.
pub trait Reducer: Sync {
    type Acc: Send;
    fn empty(&self) -> Self::Acc;
    fn observe(&self, acc: &mut Self::Acc, replicate: u64, traj: &Trajectory);
    fn merge(&self, left: Self::Acc, right: Self::Acc) -> Self::Acc;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub replicate: u64,
    pub seed: u64,
    pub error: String,
    pub numerical: bool,
}

#[derive(Debug, Clone)]
pub struct Ensemble<A> {
    pub base_seed: u64,
    pub replicates: u64,
    pub summary: A,
    pub failures: Vec<ReplicateFailure>,
}

/// Runs `job(replicate, seed)` for `replicates` replicates with seeds derived from
/// `base_seed`, feeding successful trajectories to `reducer`.
pub fn run_ensemble<F, R>(
    replicates: u64,
    base_seed: u64,
    job: F,
    reducer: &R,
) -> Result<Ensemble<R::Acc>>
where
    F: Fn(u64, u64) -> Result<Trajectory> + Sync,
    R: Reducer,
{
    if replicates == 0 {
        return Err(Error::param("replicates", "need at least one replicate"));
    }
    let chunks = replicates.div_ceil(CHUNK);
    let partials: Vec<(R::Acc, Vec<ReplicateFailure>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = reducer.empty();
            let mut failures = Vec::new();
            for r in c * CHUNK..((c + 1) * CHUNK).min(replicates) {
                let seed = replicate_seed(base_seed, r);
                match job(r, seed) {
                    Ok(traj) => reducer.observe(&mut acc, r, &traj),
                    Err(e) => failures.push(ReplicateFailure {
                        replicate: r,
                        seed,
                        numerical: e.is_numerical(),
                        error: e.to_string(),
                    }),
                }
            }
            (acc, failures)
        })
        .collect();
    let mut summary = reducer.empty();
    let mut failures = Vec::new();
    for (acc, f) in partials {
        summary = reducer.merge(summary, acc);
        failures.extend(f);
    }
    Ok(Ensemble {
        base_seed,
        replicates,
        summary,
        failures,
    })
}

/// Keeps every trajectory, ordered by replicate.
pub struct Collect;

impl Reducer for Collect {
    type Acc = Vec<(u64, Trajectory)>;

    fn empty(&self) -> Self::Acc {
        Vec::new()
    }

    fn observe(&self, acc: &mut Self::Acc, replicate: u64, traj: &Trajectory) {
        acc.push((replicate, traj.clone()));
    }

    fn merge(&self, mut left: Self::Acc, right: Self::Acc) -> Self::Acc {
        left.extend(right);
        left
    }
}

/// Exact integer power sums of the counts per (observation, slot), plus optional
/// cross products within an observation. Integer sums make the summary identical
/// under any merge order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentSums {
    pub observations: usize,
    pub sites: usize,
    pub n: u64,
    /// `[sum N, sum N^2, sum N^3, sum N^4]` at `obs * sites + slot`.
    pub powers: Vec<[u128; 4]>,
    /// `sum N_i N_j` at `(obs * sites + i) * sites + j`, when requested.
    pub cross: Option<Vec<u128>>,
    pub boundary_leak: u64,
    pub events: u64,
}

/// Reducer producing [`MomentSums`].
pub struct Moments {
    pub observations: usize,
    pub sites: usize,
    pub cross: bool,
}

impl Reducer for Moments {
    type Acc = MomentSums;

    fn empty(&self) -> MomentSums {
        let cells = self.observations * self.sites;
        MomentSums {
            observations: self.observations,
            sites: self.sites,
            n: 0,
            powers: vec![[0; 4]; cells],
            cross: self.cross.then(|| vec![0; cells * self.sites]),
            boundary_leak: 0,
            events: 0,
        }
    }

    fn observe(&self, acc: &mut MomentSums, _replicate: u64, traj: &Trajectory) {
        assert_eq!(
            traj.snapshots.len(),
            self.observations,
            "observation count mismatch"
        );
        acc.n += 1;
        acc.boundary_leak += traj.boundary_leak;
        acc.events += traj.events;
        for (o, snap) in traj.snapshots.iter().enumerate() {
            for (i, &c) in snap.counts.iter().enumerate() {
                let c = c as u128;
                let p = &mut acc.powers[o * self.sites + i];
                p[0] += c;
                p[1] += c * c;
                p[2] += c * c * c;
                p[3] += c * c * c * c;
            }
            if let Some(cross) = acc.cross.as_mut() {
                for (i, &ci) in snap.counts.iter().enumerate() {
                    let row = (o * self.sites + i) * self.sites;
                    for (j, &cj) in snap.counts.iter().enumerate() {
                        cross[row + j] += ci as u128 * cj as u128;
                    }
                }
            }
        }
    }

    fn merge(&self, mut left: MomentSums, right: MomentSums) -> MomentSums {
        left.n += right.n;
        left.boundary_leak += right.boundary_leak;
        left.events += right.events;
        for (a, b) in left.powers.iter_mut().zip(&right.powers) {
            for k in 0..4 {
                a[k] += b[k];
            }
        }
        if let (Some(a), Some(b)) = (left.cross.as_mut(), right.cross.as_ref()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        left
    }
}

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// Whether `x` lies within `k` standard errors.
    pub fn covers(&self, x: f64, k: f64) -> bool {
        (self.value - x).abs() <= k * self.se
    }
}

impl MomentSums {
    fn cell(&self, obs: usize, slot: usize) -> &[u128; 4] {
        &self.powers[obs * self.sites + slot]
    }

    pub fn mean(&self, obs: usize, slot: usize) -> Estimate {
        let n = self.n as f64;
        let var = self.variance(obs, slot).value;
        Estimate {
            value: self.cell(obs, slot)[0] as f64 / n,
            se: (var / n).sqrt(),
        }
    }

    /// Unbiased sample variance with the standard error of that estimator,
    /// `sqrt((m4 - (n-3)/(n-1) s^4) / n)`.
    pub fn variance(&self, obs: usize, slot: usize) -> Estimate {
        let [s1, s2, s3, s4] = *self.cell(obs, slot);
        let n = self.n;
        if n < 2 {
            return Estimate {
                value: 0.0,
                se: f64::INFINITY,
            };
        }
        // n*s2 - s1^2 >= 0 exactly (Cauchy-Schwarz), computed in integers.
        let centered = n as u128 * s2 - s1 * s1;
        let nf = n as f64;
        let var = centered as f64 / (nf * (nf - 1.0));
        let m = s1 as f64 / nf;
        let m4 = s4 as f64 / nf - 4.0 * m * s3 as f64 / nf + 6.0 * m * m * s2 as f64 / nf
            - 3.0 * m.powi(4);
        let v = ((m4 - (nf - 3.0) / (nf - 1.0) * var * var) / nf).max(0.0);
        Estimate {
            value: var,
            se: v.sqrt(),
        }
    }

    /// Mean of `N_i N_j` with its standard error, when cross sums were kept.
    pub fn cross_moment(&self, obs: usize, i: usize, j: usize) -> Option<f64> {
        let cross = self.cross.as_ref()?;
        Some(cross[(obs * self.sites + i) * self.sites + j] as f64 / self.n as f64)
    }
}
